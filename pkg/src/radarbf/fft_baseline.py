"""Conventional FFT point-cloud pipeline, used as the comparison baseline.

Range and Doppler come from a 2D FFT per antenna whose powers are summed
non-coherently into one range-Doppler map.  OS-CFAR runs on that map, and
each detection's per-antenna values go through zero-padded angle FFTs:
one across the azimuth row, then one across the elevation rows for every
azimuth peak.

Angle FFTs need the array on a half-wavelength lattice in the x/z plane.
Bin ``b`` of a centered ``n``-point FFT maps to ``mu = b / (n / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array_model import ArrayGeometry, WaveformConfig, direction_vectors
from .capon import RadarPoint, StageTimer, curve_peaks, window_vector
from .cfar import CfarParams, os_cfar
from .config import PipelineConfig
from .errors import ConfigError
from .scene import DataCube

_LATTICE_TOL = 1e-6


@dataclass(frozen=True)
class RangeDopplerMap:
    """Per-antenna 2D spectra ``[antenna, range bin, Doppler]`` (Doppler centered)."""

    per_antenna: np.ndarray
    waveform: WaveformConfig
    geometry: ArrayGeometry = field(repr=False)

    @property
    def accumulated(self) -> np.ndarray:
        """Non-coherent sum ``sum_m |X_m|**2``, shape ``(J, K)``."""
        return np.sum(np.abs(self.per_antenna) ** 2, axis=0)

    def doppler_bins(self) -> np.ndarray:
        k = self.per_antenna.shape[2]
        return np.arange(k) - k // 2


@dataclass(frozen=True)
class RdDetection:
    range_bin: int
    doppler_bin: int  # signed
    power: float


@dataclass(frozen=True)
class LatticeLayout:
    """Integer half-wavelength coordinates of a separable array."""

    x: np.ndarray
    z: np.ndarray
    azimuth_row: np.ndarray  # antenna indices of the z == 0 row, ordered by x


def range_doppler_fft(cube: DataCube, range_window: str = "none",
                      doppler_window: str = "none") -> RangeDopplerMap:
    s = cube.samples
    M, K, S = s.shape
    wr = window_vector(range_window, S)
    if wr is not None:
        s = s * wr
    rng = np.fft.fft(s, axis=2)  # (M, K, J)
    wd = window_vector(doppler_window, K)
    if wd is not None:
        rng = rng * wd[None, :, None]
    rd = np.fft.fftshift(np.fft.fft(rng, axis=1), axes=1)
    return RangeDopplerMap(np.transpose(rd, (0, 2, 1)), cube.waveform, cube.geometry)


def cfar_rd(rd: RangeDopplerMap, params: CfarParams | None = None,
            peak_grouping: bool = True) -> list[RdDetection]:
    """OS-CFAR on the accumulated map; the Doppler axis wraps around."""
    params = params or CfarParams()
    res = os_cfar(rd.accumulated, params, modes=("symmetric", "wrap"),
                  peak_grouping=peak_grouping)
    k = rd.per_antenna.shape[2]
    return [RdDetection(int(j), int(q) - k // 2, float(p))
            for (j, q), p in zip(res.cells, res.power)]


def lattice_layout(geometry: ArrayGeometry, wavelength: float) -> LatticeLayout:
    """Check that the array suits angle FFTs and return its lattice coordinates.

    Raises
    ------
    ConfigError
        If antennas leave the x/z plane, sit off the half-wavelength
        lattice, overlap on it, or the zero-elevation row is not
        contiguous in x from 0.
    """
    u = geometry.half_wavelength_units(wavelength)
    if np.any(np.abs(u[:, 1]) > _LATTICE_TOL):
        raise ConfigError("angle FFT needs all antennas in the x/z plane")
    xz = np.rint(u[:, [0, 2]])
    if np.any(np.abs(u[:, [0, 2]] - xz) > _LATTICE_TOL):
        raise ConfigError("angle FFT needs antennas on a half-wavelength lattice")
    x, z = xz[:, 0].astype(int), xz[:, 1].astype(int)
    if len(set(zip(x.tolist(), z.tolist()))) != len(x):
        raise ConfigError("angle FFT needs distinct lattice positions")
    if x.min() < 0 or z.min() < 0:
        raise ConfigError("angle FFT needs non-negative lattice coordinates")
    row = np.flatnonzero(z == 0)
    row = row[np.argsort(x[row])]
    if not np.array_equal(x[row], np.arange(len(row))) or len(row) < 2:
        raise ConfigError("angle FFT needs a contiguous zero-elevation row starting at x = 0")
    return LatticeLayout(x, z, row)


def tdm_compensation(values: np.ndarray, doppler_bin: int, geometry: ArrayGeometry,
                     chirps: int) -> np.ndarray:
    """Remove the Doppler phase each transmit slot picks up from its time offset."""
    if geometry.tx_index is None or geometry.num_tx < 2:
        return values
    t = np.asarray(geometry.tx_index, dtype=float)
    return values * np.exp(-2j * np.pi * doppler_bin * t / (chirps * geometry.num_tx))


def _centered_axis(n: int) -> np.ndarray:
    return (np.arange(n) - n // 2) / (n / 2)


def angle_fft(rd: RangeDopplerMap, detection: RdDetection,
              azimuth_fft_n: int = 64, elevation_fft_n: int = 32,
              peak_rel_threshold: float = 0.5,
              layout: LatticeLayout | None = None) -> list[RadarPoint]:
    """Angle FFTs at one range-Doppler detection.

    Every azimuth-spectrum peak within ``peak_rel_threshold`` of the
    strongest becomes one point; its elevation is the argmax of an FFT
    over rows after the azimuth phase ramp is removed (0 for a single-row
    array).  Combinations with
    ``mu**2 + nu**2 > 1`` are dropped.
    """
    wf, geo = rd.waveform, rd.geometry
    layout = layout or lattice_layout(geo, wf.wavelength)
    K = rd.per_antenna.shape[2]
    v = rd.per_antenna[:, detection.range_bin, detection.doppler_bin + K // 2]
    if wf.tdm_interleaved:
        v = tdm_compensation(v, detection.doppler_bin, geo, K)

    if azimuth_fft_n < len(layout.azimuth_row):
        raise ConfigError("azimuth_fft_n is shorter than the azimuth row")
    if elevation_fft_n <= layout.z.max():
        raise ConfigError("elevation_fft_n is shorter than the elevation extent")
    az = np.abs(np.fft.fftshift(np.fft.fft(v[layout.azimuth_row], azimuth_fft_n))) ** 2
    mu_axis = _centered_axis(azimuth_fft_n)
    nu_axis = _centered_axis(elevation_fft_n)
    rng = detection.range_bin * wf.range_resolution
    velocity = detection.doppler_bin * wf.velocity_resolution
    points = []
    for b in curve_peaks(az, peak_rel_threshold, wrap=True):
        mu = float(mu_axis[b])
        nu = 0.0
        if layout.z.max() > 0:
            # strip the azimuth ramp, then add each row up coherently
            derot = v * np.exp(-1j * np.pi * mu * layout.x)
            rows = np.zeros(elevation_fft_n, dtype=complex)
            np.add.at(rows, layout.z, derot)
            el = np.abs(np.fft.fftshift(np.fft.fft(rows))) ** 2
            nu = float(nu_axis[int(np.argmax(el))])
        if mu * mu + nu * nu > 1.0:
            continue
        points.append(RadarPoint(
            position=rng * direction_vectors(mu, nu),
            radial_velocity=velocity,
            power=float(az[b]),
            mu=mu,
            nu=nu,
            range_bin=detection.range_bin,
            doppler_bin=detection.doppler_bin,
        ))
    return points


def process_frame_fft(cube: DataCube, config: PipelineConfig | None = None,
                      timings: dict | None = None) -> list[RadarPoint]:
    """Run the FFT baseline on one frame.

    Output order matches :func:`radarbf.capon.process_frame`: range bin,
    then mu, then nu.
    """
    config = config or PipelineConfig(pipeline="fft")
    timer = StageTimer(timings)
    layout = lattice_layout(cube.geometry, cube.waveform.wavelength)
    with timer("range_doppler_fft"):
        rd = range_doppler_fft(cube, config.range_window, config.doppler_window)
    with timer("os_cfar"):
        dets = cfar_rd(rd, config.cfar, config.peak_grouping)
    points = []
    with timer("angle_fft"):
        for det in dets:
            points.extend(angle_fft(rd, det, config.azimuth_fft_n, config.elevation_fft_n,
                                    config.peak_rel_threshold, layout))
    points.sort(key=lambda p: (p.range_bin, p.mu, p.nu, p.doppler_bin))
    return points
