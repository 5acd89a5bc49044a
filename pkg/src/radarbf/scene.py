"""Point-scatterer scene simulator.

Produces dechirped FMCW data cubes under the stop-and-hop approximation:
range maps to a fast-time beat tone, radial velocity to a linear phase
across chirps and direction to the per-antenna steering phase.  Used as
ground truth for every pipeline test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_model import (
    C,
    ArrayGeometry,
    DirectionGrid,
    DoaDirection,
    WaveformConfig,
    round_half_down,
    steering_matrix,
)
from .errors import SceneError, ValidationError


@dataclass(frozen=True)
class Scatterer:
    direction: DoaDirection
    range: float
    radial_velocity: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.amplitude) or self.amplitude < 0:
            raise ValidationError("amplitude must be finite and >= 0")

    @property
    def position(self) -> np.ndarray:
        return self.range * self.direction.unit_vector


@dataclass(frozen=True)
class Scene:
    scatterers: tuple = ()
    noise_std: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        if not np.isfinite(self.noise_std) or self.noise_std < 0:
            raise ValidationError("noise_std must be finite and >= 0")


@dataclass(frozen=True)
class DataCube:
    """Complex samples indexed ``[antenna, chirp, fast-time sample]``."""

    samples: np.ndarray
    waveform: WaveformConfig
    geometry: ArrayGeometry = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if not np.iscomplexobj(s):
            s = s.astype(np.complex128)
        expected = (self.geometry.num_antennas, self.waveform.chirps_per_frame,
                    self.waveform.samples_per_chirp)
        if s.shape != expected:
            raise ValidationError(f"cube shape {s.shape} does not match {expected}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("cube contains non-finite samples")
        object.__setattr__(self, "samples", s)

    @property
    def shape(self):
        return self.samples.shape

    def scaled(self, factor: float) -> "DataCube":
        return DataCube(self.samples * factor, self.waveform, self.geometry)


def check_scatterer(index: int, s: Scatterer, waveform: WaveformConfig) -> None:
    if not 0.0 < s.range < waveform.max_range:
        raise SceneError(index, f"range {s.range} m outside (0, {waveform.max_range:.4f}) m")
    if not abs(s.radial_velocity) < waveform.max_speed:
        raise SceneError(index, f"|velocity| {abs(s.radial_velocity)} m/s not below "
                                f"max unambiguous speed {waveform.max_speed:.4f} m/s")


def scatterer_cube(s: Scatterer, waveform: WaveformConfig, geometry: ArrayGeometry) -> np.ndarray:
    """Noiseless contribution of one scatterer, shape ``(M, K, S)``."""
    K, S = waveform.chirps_per_frame, waveform.samples_per_chirp
    f_beat = 2.0 * waveform.chirp_slope * s.range / C
    fast = np.exp(2j * np.pi * f_beat * np.arange(S) / waveform.sample_rate)
    slow_phase = 4.0 * np.pi * s.radial_velocity * waveform.chirp_interval / waveform.wavelength
    slow = np.exp(1j * slow_phase * np.arange(K))
    spatial = steering_matrix(s.direction.mu, s.direction.nu, geometry.positions,
                              waveform.wavelength)
    if waveform.tdm_interleaved and geometry.num_tx > 1:
        # transmitter t fires t/n_tx of a chirp interval after slot 0
        offset = np.asarray(geometry.tx_index, dtype=float) / geometry.num_tx
        spatial = spatial * np.exp(1j * slow_phase * offset)
    return s.amplitude * spatial[:, None, None] * slow[None, :, None] * fast[None, None, :]


def simulate(scene: Scene, waveform: WaveformConfig, geometry: ArrayGeometry) -> DataCube:
    """Synthesize the raw cube a scene would produce.

    Scatterer terms are summed in list order, then circular Gaussian
    noise with per-component standard deviation ``noise_std`` is added,
    drawn antenna-major from ``numpy.random.default_rng(rng_seed)``.

    Raises
    ------
    SceneError
        If a scatterer is outside the unambiguous range or velocity.
    """
    for i, s in enumerate(scene.scatterers):
        check_scatterer(i, s, waveform)
    shape = (geometry.num_antennas, waveform.chirps_per_frame, waveform.samples_per_chirp)
    samples = np.zeros(shape, dtype=np.complex128)
    for s in scene.scatterers:
        samples += scatterer_cube(s, waveform, geometry)
    if scene.noise_std > 0:
        rng = np.random.default_rng(scene.rng_seed)
        noise = rng.standard_normal(shape + (2,))
        samples += scene.noise_std * (noise[..., 0] + 1j * noise[..., 1])
    return DataCube(samples, waveform, geometry)


@dataclass(frozen=True)
class ExpectedDetection:
    range_bin: int
    mu_bin: int
    nu_bin: int
    doppler_bin: int


def doppler_bin_of(velocity: float, waveform: WaveformConfig) -> int:
    """Signed Doppler bin in ``[-K/2, K/2)``."""
    K = waveform.chirps_per_frame
    q = round_half_down(velocity / waveform.velocity_resolution)
    return int((q + K // 2) % K - K // 2)


def expected_detection(s: Scatterer, waveform: WaveformConfig, grid: DirectionGrid) -> ExpectedDetection:
    """Bins a correct pipeline should report for ``s``."""
    return ExpectedDetection(
        range_bin=round_half_down(s.range / waveform.range_resolution),
        mu_bin=grid.mu_index(s.direction.mu),
        nu_bin=grid.nu_index(s.direction.nu),
        doppler_bin=doppler_bin_of(s.radial_velocity, waveform),
    )


def noise_std_for_snr(snr_db: float, amplitude: float = 1.0) -> float:
    """Per-component noise std giving ``amplitude**2 / (2 std**2)`` = SNR."""
    return amplitude / np.sqrt(2.0 * 10.0 ** (snr_db / 10.0))
