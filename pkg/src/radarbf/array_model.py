"""Array geometry, waveform parameters and sine-space direction model.

Directions are parameterized by ``(mu, nu)`` with unit vector
``r = [mu, sqrt(1 - mu**2 - nu**2), nu]`` in the radar frame
(X = azimuth axis, Y = boresight/range, Z = elevation).  The phase of a
plane wave at antenna ``m`` relative to the reference antenna (index 0,
at the origin) is ``2*pi * r . d_m / wavelength``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.constants import speed_of_light

from .errors import DegenerateDirectionError, ValidationError

C = speed_of_light

Subset = Literal["all", "zero_elevation_only"]

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class WaveformConfig:
    """FMCW chirp/frame parameters.

    ``chirps_per_frame`` is the slow-time length seen by one virtual
    antenna and ``chirp_interval`` the repetition period of that
    antenna's chirps.  ``tdm_interleaved`` marks data in which the
    transmitters fire in turn within each chirp interval.
    """

    carrier_frequency: float
    chirp_slope: float
    sample_rate: float
    samples_per_chirp: int
    chirps_per_frame: int
    chirp_interval: float
    tdm_interleaved: bool = False

    def __post_init__(self):
        for name in ("carrier_frequency", "chirp_slope", "sample_rate",
                     "samples_per_chirp", "chirps_per_frame", "chirp_interval"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
                raise ValidationError(f"{name} must be a number, got {value!r}")
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("samples_per_chirp", "chirps_per_frame"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValidationError(f"{name} must be an integer")
        if not (np.isfinite(self.range_resolution) and self.range_resolution > 0):
            raise ValidationError("range resolution is not finite and positive")
        if not (np.isfinite(self.max_speed) and self.max_speed > 0):
            raise ValidationError("max unambiguous speed is not finite and positive")

    @property
    def wavelength(self) -> float:
        return C / self.carrier_frequency

    @property
    def range_resolution(self) -> float:
        """Range bin width in meters."""
        return C * self.sample_rate / (2.0 * self.chirp_slope * self.samples_per_chirp)

    @property
    def max_range(self) -> float:
        return self.range_resolution * self.samples_per_chirp

    @property
    def max_speed(self) -> float:
        """Maximum unambiguous radial speed, ``wavelength / (4 T_c)``."""
        return self.wavelength / (4.0 * self.chirp_interval)

    @property
    def velocity_resolution(self) -> float:
        """Doppler bin width in m/s."""
        return self.wavelength / (2.0 * self.chirps_per_frame * self.chirp_interval)


@dataclass(frozen=True)
class ArrayGeometry:
    """Virtual antenna positions in meters (shape ``(M, 3)``).

    Parameters
    ----------
    positions : array_like
        One ``[x, y, z]`` row per virtual antenna.  Row 0 is the reference
        antenna and must sit at the origin.
    zero_elevation_indices : sequence of int
        Antennas with ``z == 0``; these form the azimuth-only subarray.
    tx_index : sequence of int, optional
        Transmit slot of every virtual antenna (TDM order).  ``None`` means
        a single transmit group.
    """

    positions: np.ndarray
    zero_elevation_indices: tuple
    tx_index: tuple | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValidationError("positions must have shape (M, 3)")
        if pos.shape[0] < 2:
            raise ValidationError("an array needs at least two antennas")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("antenna positions must be finite")
        if np.any(pos[0] != 0.0):
            raise ValidationError("reference antenna (index 0) must be at the origin")
        diff = pos[:, None, :] - pos[None, :, :]
        coincide = np.all(diff == 0.0, axis=-1)
        np.fill_diagonal(coincide, False)
        if coincide.any():
            i, j = np.argwhere(coincide)[0]
            raise ValidationError(f"antennas {i} and {j} coincide")
        zero = tuple(int(i) for i in self.zero_elevation_indices)
        if not zero:
            raise ValidationError("zero_elevation_indices must be nonempty")
        for i in zero:
            if not 0 <= i < pos.shape[0]:
                raise ValidationError(f"zero-elevation index {i} out of range")
            if pos[i, 2] != 0.0:
                raise ValidationError(f"antenna {i} listed as zero-elevation but z = {pos[i, 2]}")
        if len(set(zero)) != len(zero):
            raise ValidationError("zero_elevation_indices contains duplicates")
        tx = None
        if self.tx_index is not None:
            tx = tuple(int(t) for t in self.tx_index)
            if len(tx) != pos.shape[0] or min(tx) < 0:
                raise ValidationError("tx_index needs one non-negative entry per antenna")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "zero_elevation_indices", zero)
        object.__setattr__(self, "tx_index", tx)

    @classmethod
    def from_half_wavelength(cls, units, wavelength: float,
                             zero_elevation_indices=None, tx_index=None) -> "ArrayGeometry":
        """Build from positions expressed in units of ``wavelength / 2``."""
        units = np.asarray(units, dtype=float)
        if zero_elevation_indices is None:
            zero_elevation_indices = np.flatnonzero(units[:, 2] == 0.0)
        return cls(units * (wavelength / 2.0), tuple(zero_elevation_indices), tx_index)

    @property
    def num_antennas(self) -> int:
        return self.positions.shape[0]

    @property
    def num_tx(self) -> int:
        return 1 if self.tx_index is None else max(self.tx_index) + 1

    def subset_indices(self, subset: Subset = "all") -> np.ndarray:
        if subset == "all":
            return np.arange(self.num_antennas)
        if subset == "zero_elevation_only":
            return np.asarray(self.zero_elevation_indices)
        raise ValueError(f"unknown antenna subset {subset!r}")

    def half_wavelength_units(self, wavelength: float) -> np.ndarray:
        return self.positions / (wavelength / 2.0)


# AWR1843-style virtual array (3 TX x 4 RX, TDM order TX0, TX1, TX2),
# in units of lambda/2.  TX1 is raised by lambda/2 and shifted by lambda,
# giving 8 zero-elevation antennas and 4 elevated ones.
AWR1843_VIRTUAL_ARRAY = (
    [[x, 0, 0] for x in range(0, 4)]
    + [[x, 0, 1] for x in range(2, 6)]
    + [[x, 0, 0] for x in range(4, 8)]
)
AWR1843_TX_INDEX = (0,) * 4 + (1,) * 4 + (2,) * 4


def default_waveform(**overrides) -> WaveformConfig:
    """77 GHz chirp profile used by the bundled configs."""
    params = dict(
        carrier_frequency=77e9,
        chirp_slope=30e12,
        sample_rate=5e6,
        samples_per_chirp=128,
        chirps_per_frame=64,
        chirp_interval=120e-6,
    )
    params.update(overrides)
    return WaveformConfig(**params)


def default_geometry(waveform: WaveformConfig, with_tx: bool = True) -> ArrayGeometry:
    return ArrayGeometry.from_half_wavelength(
        AWR1843_VIRTUAL_ARRAY, waveform.wavelength,
        tx_index=AWR1843_TX_INDEX if with_tx else None,
    )


@dataclass(frozen=True)
class DoaDirection:
    mu: float
    nu: float

    def __post_init__(self):
        mu, nu = float(self.mu), float(self.nu)
        if not (math.isfinite(mu) and math.isfinite(nu)):
            raise ValidationError("mu and nu must be finite")
        if mu * mu + nu * nu > 1.0 + _UNIT_TOL:
            raise ValidationError(f"mu^2 + nu^2 must be <= 1 (mu={mu}, nu={nu})")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @property
    def unit_vector(self) -> np.ndarray:
        return direction_vectors(self.mu, self.nu)


def direction_vectors(mu, nu) -> np.ndarray:
    """Unit vectors for broadcastable ``mu``/``nu``; trailing axis is xyz."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    boresight = np.sqrt(np.clip(1.0 - mu * mu - nu * nu, 0.0, None))
    mu, boresight, nu = np.broadcast_arrays(mu, boresight, nu)
    return np.stack([mu, boresight, nu], axis=-1)


@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray

    def __len__(self):
        return len(self.entries)


def doa_to_angles(d: DoaDirection) -> tuple[float, float]:
    """Convert a sine-space direction to ``(elevation, azimuth)`` in radians."""
    cos2 = 1.0 - d.nu * d.nu
    if cos2 <= 1e-12:
        raise DegenerateDirectionError(f"azimuth undefined at nu = {d.nu}")
    elevation = math.asin(d.nu)
    ratio = max(-1.0, min(1.0, d.mu / math.sqrt(cos2)))
    return elevation, math.asin(ratio)


def angles_to_doa(elevation: float, azimuth: float) -> DoaDirection:
    """Inverse of :func:`doa_to_angles`."""
    return DoaDirection(math.sin(azimuth) * math.cos(elevation), math.sin(elevation))


def phase_difference(d: DoaDirection, antenna_index: int, geometry: ArrayGeometry,
                     waveform: WaveformConfig) -> float:
    """Phase of antenna ``antenna_index`` relative to the reference antenna."""
    if not 0 <= antenna_index < geometry.num_antennas:
        raise IndexError(f"antenna index {antenna_index} out of range")
    r = d.unit_vector
    return float(2.0 * np.pi * (r @ geometry.positions[antenna_index]) / waveform.wavelength)


def steering_matrix(mu, nu, positions: np.ndarray, wavelength: float) -> np.ndarray:
    """Steering vectors for many directions at once.

    ``mu`` and ``nu`` broadcast against each other to shape ``G``; the
    result has shape ``(M,) + G``.
    """
    r = direction_vectors(mu, nu)
    phase = (2.0 * np.pi / wavelength) * np.tensordot(positions, r, axes=([1], [-1]))
    return np.exp(1j * phase)


def steering_vector(d: DoaDirection, geometry: ArrayGeometry, waveform: WaveformConfig,
                    subset: Subset = "all") -> SteeringVector:
    idx = geometry.subset_indices(subset)
    entries = steering_matrix(d.mu, d.nu, geometry.positions[idx], waveform.wavelength)
    return SteeringVector(entries)


@dataclass(frozen=True)
class DirectionGrid:
    """Uniform sine-space search grids for azimuth (mu) and elevation (nu)."""

    azimuth_bins: int = 188
    azimuth_max_deg: float = 70.0
    elevation_bins: int = 101
    elevation_max_deg: float = 25.0
    mu: np.ndarray = field(init=False, repr=False, compare=False)
    nu: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.azimuth_bins < 2 or self.elevation_bins < 2:
            raise ValidationError("grids need at least two bins")
        mu_max = math.sin(math.radians(self.azimuth_max_deg))
        nu_max = math.sin(math.radians(self.elevation_max_deg))
        mu = np.linspace(-mu_max, mu_max, self.azimuth_bins)
        nu = np.linspace(-nu_max, nu_max, self.elevation_bins)
        mu.setflags(write=False)
        nu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @property
    def mu_step(self) -> float:
        return float(self.mu[1] - self.mu[0])

    @property
    def nu_step(self) -> float:
        return float(self.nu[1] - self.nu[0])

    def mu_index(self, mu) -> int:
        return nearest_index(self.mu, mu)

    def nu_index(self, nu) -> int:
        return nearest_index(self.nu, nu)


def nearest_index(grid: np.ndarray, value) -> int:
    """Nearest index on a uniform grid; exact midpoints go to the lower index."""
    step = grid[1] - grid[0]
    frac = (float(value) - grid[0]) / step
    idx = math.ceil(frac - 0.5 - 1e-9)
    return int(min(max(idx, 0), len(grid) - 1))


def round_half_down(x: float) -> int:
    return int(math.ceil(x - 0.5 - 1e-9))
