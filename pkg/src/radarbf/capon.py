"""Capon (MVDR) beamforming point-cloud pipeline.

Stages, per frame:

1. range FFT along fast time;
2. azimuth Capon spectrum on the zero-elevation subarray, one covariance
   per range bin, giving a range-azimuth power map;
3. OS-CFAR on that map, yielding azimuth candidates;
4. for each candidate, an elevation Capon sweep on the full array at the
   candidate's range bin; every qualifying local maximum is a target;
5. each target's Capon weights beamform the range slice into a single
   slow-time series whose Doppler spectrum gives the radial velocity.

A grid look direction can sit up to half a step off the true direction.
At high SNR and light loading MVDR then treats the target as
interference and cancels it, which flattens the map across range bins
and steers Doppler weights away from the target.  Both covariances are
therefore loaded to at least ``noise_loading`` times the frame noise
floor of their subarray, which leaves noiseless frames untouched.

Every covariance is diagonally loaded and factorized once (Cholesky), and
the factor is reused for all grid directions evaluated at that bin.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window

from .array_model import (
    ArrayGeometry,
    DirectionGrid,
    DoaDirection,
    Subset,
    WaveformConfig,
    direction_vectors,
    steering_matrix,
)
from .cfar import CfarParams, os_cfar
from .config import PipelineConfig
from .errors import SingularSliceError
from .scene import DataCube


@dataclass(frozen=True)
class RangeSpectrum:
    """Range-FFT output indexed ``[antenna, chirp, range bin]``."""

    bins: np.ndarray
    waveform: WaveformConfig
    geometry: ArrayGeometry = field(repr=False)

    @property
    def num_range_bins(self) -> int:
        return self.bins.shape[2]

    def slice(self, range_bin: int, subset: Subset = "all") -> np.ndarray:
        """``X_j``: antennas x chirps at one range bin."""
        return self.bins[self.geometry.subset_indices(subset), :, range_bin]

    def mean_antenna_power(self, subset: Subset = "all") -> float:
        """Frame mean of ``trace(R_j) / M_subset`` over range bins."""
        x = self.bins[self.geometry.subset_indices(subset)]
        return float(np.mean(np.abs(x) ** 2))

    def noise_floor(self, subset: Subset = "all") -> float:
        """Median over range bins of the mean per-antenna power.

        Targets occupy few range bins, so this tracks the receiver noise
        and is ~0 for noiseless frames.
        """
        x = self.bins[self.geometry.subset_indices(subset)]
        return float(np.median(np.mean(np.abs(x) ** 2, axis=(0, 1))))


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray
    loading_factor: float
    loading_level: float  # absolute value added to the diagonal

    def cholesky(self) -> np.ndarray:
        return np.linalg.cholesky(self.entries)


@dataclass(frozen=True)
class RangeAzimuthMap:
    power: np.ndarray  # (range bins, azimuth bins), linear
    grid: DirectionGrid = field(repr=False)
    singular_bins: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, int))


@dataclass(frozen=True)
class AzimuthCandidate:
    range_bin: int
    mu_index: int
    mu: float
    power: float


@dataclass(frozen=True)
class CaponWeights:
    entries: np.ndarray
    mu: float
    nu: float


@dataclass(frozen=True)
class ElevationPeak:
    nu_index: int
    nu: float
    power: float
    weights: CaponWeights


@dataclass(frozen=True)
class DopplerEstimate:
    velocity: float
    doppler_bin: int
    curve: np.ndarray       # |FFT|, centered ordering
    velocities: np.ndarray  # velocity axis matching ``curve``


@dataclass(frozen=True)
class RadarPoint:
    position: np.ndarray
    radial_velocity: float
    power: float
    mu: float
    nu: float
    range_bin: int
    mu_index: int | None = None
    nu_index: int | None = None
    doppler_bin: int | None = None

    @property
    def direction(self) -> DoaDirection:
        return DoaDirection(self.mu, self.nu)


def window_vector(name: str, n: int) -> np.ndarray | None:
    if name == "none":
        return None
    return get_window(name, n)


def range_fft(cube: DataCube, window: str = "none") -> RangeSpectrum:
    x = cube.samples
    w = window_vector(window, x.shape[2])
    if w is not None:
        x = x * w
    return RangeSpectrum(np.fft.fft(x, axis=2), cube.waveform, cube.geometry)


def _hermitian(r: np.ndarray) -> np.ndarray:
    return 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))


def covariance(spectrum: RangeSpectrum, range_bin: int, subset: Subset = "all",
               loading: float = 1e-3, loading_power: float | None = None,
               min_level: float = 0.0) -> CovarianceMatrix:
    """Diagonally loaded spatial covariance ``X_j X_j^H / K`` at one bin.

    The loading added is ``max(loading * p, min_level) * I`` where ``p``
    defaults to the bin's own ``trace(R) / M_subset``; pass
    ``loading_power`` to load relative to a different reference power
    (e.g. the frame mean).

    Raises
    ------
    SingularSliceError
        If the slice carries no energy.
    """
    if not 0 <= range_bin < spectrum.num_range_bins:
        raise IndexError(f"range bin {range_bin} out of range")
    if loading < 0:
        raise ValueError("loading must be >= 0")
    x = spectrum.slice(range_bin, subset)
    m, k = x.shape
    r = _hermitian(x @ x.conj().T / k)
    trace = float(np.trace(r).real)
    if trace <= 0.0:
        raise SingularSliceError(f"range bin {range_bin} has zero energy")
    ref = trace / m if loading_power is None else float(loading_power)
    level = max(loading * ref, float(min_level))
    return CovarianceMatrix(r + level * np.eye(m), loading, level)


def _loading_levels(traces: np.ndarray, m: int, loading: float, reference: str) -> np.ndarray:
    if reference == "frame":
        return np.full(traces.shape, loading * float(np.mean(traces)) / m)
    return loading * traces / m


def azimuth_spectrum(spectrum: RangeSpectrum, grid: DirectionGrid, loading: float = 1e-3,
                     loading_reference: str = "frame",
                     floor_rel: float = float(np.finfo(float).eps),
                     min_level: float = 0.0) -> RangeAzimuthMap:
    """Capon power ``1 / (a^H R^-1 a)`` over range bins x azimuth grid (nu = 0).

    Every bin is loaded by at least ``min_level``.  Bins whose loaded
    covariance is identically zero get a floor power of ``floor_rel``
    times the largest regular value instead of failing.
    """
    idx = spectrum.geometry.subset_indices("zero_elevation_only")
    if len(idx) < 2:
        raise ValueError("zero-elevation subarray needs at least two antennas")
    x = np.moveaxis(spectrum.bins[idx], 2, 0)            # (J, Ms, K)
    j_bins, m, k = x.shape
    r = _hermitian(x @ np.conj(np.swapaxes(x, 1, 2)) / k)
    traces = np.trace(r, axis1=1, axis2=2).real
    levels = np.maximum(_loading_levels(traces, m, loading, loading_reference), min_level)
    singular = (traces <= 0.0) & (levels <= 0.0)
    a = steering_matrix(grid.mu, 0.0, spectrum.geometry.positions[idx],
                        spectrum.waveform.wavelength)     # (Ms, G)
    power = np.empty((j_bins, len(grid.mu)))
    ok = ~singular
    if ok.any():
        loaded = r[ok] + levels[ok, None, None] * np.eye(m)
        chol = np.linalg.cholesky(loaded)
        y = np.linalg.solve(chol, a[None])                # L^-1 a for all grid points
        power[ok] = 1.0 / np.sum(np.abs(y) ** 2, axis=1)
    if singular.any():
        top = power[ok].max() if ok.any() else 0.0
        power[singular] = floor_rel * top if top > 0 else np.finfo(float).tiny
    return RangeAzimuthMap(power, grid, np.flatnonzero(singular))


def os_cfar_2d(ra_map: RangeAzimuthMap, params: CfarParams,
               peak_grouping: bool = True) -> list[AzimuthCandidate]:
    res = os_cfar(ra_map.power, params, modes=("symmetric", "symmetric"),
                  peak_grouping=peak_grouping)
    mu = ra_map.grid.mu
    return [AzimuthCandidate(int(j), int(i), float(mu[i]), float(p))
            for (j, i), p in zip(res.cells, res.power)]


def curve_peaks(power: np.ndarray, rel_threshold: float, wrap: bool = False) -> np.ndarray:
    """Strict local maxima of a 1D curve above a relative gate.

    End points count as peaks unless ``wrap`` makes the curve circular.
    """
    p = np.asarray(power, dtype=float)
    if wrap:
        left, right = np.roll(p, 1), np.roll(p, -1)
    else:
        left = np.concatenate(([-np.inf], p[:-1]))
        right = np.concatenate((p[1:], [-np.inf]))
    peak = (p > left) & (p > right)
    top = p.max() if p.size else 0.0
    return np.flatnonzero(peak & (p >= rel_threshold * top) & (p > 0))


def capon_weights(chol: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, float]:
    """Weights ``R^-1 a / (a^H R^-1 a)`` and power from a Cholesky factor of R."""
    y = np.linalg.solve(chol, a)
    q = float(np.vdot(y, y).real)
    w = np.linalg.solve(chol.conj().T, y) / q
    return w, 1.0 / q


def elevation_sweep(spectrum: RangeSpectrum, candidate: AzimuthCandidate, grid: DirectionGrid,
                    loading: float = 1e-3, loading_power: float | None = None,
                    peak_rel_threshold: float = 0.5,
                    cov: CovarianceMatrix | None = None) -> list[ElevationPeak]:
    """Full-array Capon sweep over the elevation grid at a candidate's (range, mu).

    Returns one entry per strict local maximum whose power is at least
    ``peak_rel_threshold`` times the curve maximum.  Grid points with
    ``mu**2 + nu**2 > 1`` are not physical and are skipped.
    """
    if cov is None:
        cov = covariance(spectrum, candidate.range_bin, "all", loading, loading_power)
    chol = cov.cholesky()
    curve, y = elevation_curve(spectrum, candidate.mu, grid, chol)
    positions, lam = spectrum.geometry.positions, spectrum.waveform.wavelength
    peaks = []
    for li in curve_peaks(curve, peak_rel_threshold):
        nu = float(grid.nu[li])
        w, _ = capon_weights(chol, steering_matrix(candidate.mu, nu, positions, lam))
        peaks.append(ElevationPeak(int(li), nu, float(curve[li]),
                                   CaponWeights(w, candidate.mu, nu)))
    return peaks


def elevation_curve(spectrum: RangeSpectrum, mu: float, grid: DirectionGrid,
                    chol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Capon power along the nu grid at fixed mu, plus ``L^-1 a`` per grid point."""
    nu = grid.nu
    valid = mu * mu + nu * nu <= 1.0
    a = steering_matrix(mu, np.where(valid, nu, 0.0), spectrum.geometry.positions,
                        spectrum.waveform.wavelength)
    y = np.linalg.solve(chol, a)
    curve = np.where(valid, 1.0 / np.sum(np.abs(y) ** 2, axis=0), 0.0)
    return curve, y


def doppler_estimate(spectrum: RangeSpectrum, range_bin: int, weights: CaponWeights,
                     waveform: WaveformConfig | None = None,
                     window: str = "none") -> DopplerEstimate:
    """Beamform the full-array slice with ``weights`` and pick the Doppler peak."""
    waveform = waveform or spectrum.waveform
    x = weights.entries.conj() @ spectrum.slice(range_bin, "all")
    k = x.shape[0]
    w = window_vector(window, k)
    if w is not None:
        x = x * w
    curve = np.abs(np.fft.fftshift(np.fft.fft(x)))
    bins = np.arange(k) - k // 2
    velocities = bins * waveform.velocity_resolution
    peak = int(np.argmax(curve))
    return DopplerEstimate(float(velocities[peak]), int(bins[peak]), curve, velocities)


class StageTimer:
    """Accumulates wall-clock seconds per named stage."""

    def __init__(self, sink: dict | None = None):
        self.times = sink if sink is not None else {}

    @contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0


def process_frame(cube: DataCube, config: PipelineConfig | None = None,
                  timings: dict | None = None) -> list[RadarPoint]:
    """Run the full Capon pipeline on one frame.

    Points are returned sorted by (range bin, mu index, nu index).
    ``timings``, when given, receives seconds spent per stage.
    """
    config = config or PipelineConfig()
    grid = config.grid
    timer = StageTimer(timings)
    with timer("range_fft"):
        spectrum = range_fft(cube, config.range_window)
    with timer("azimuth_capon"):
        ra_map = azimuth_spectrum(spectrum, grid, config.loading, config.loading_reference,
                                  config.floor_rel,
                                  config.noise_loading * spectrum.noise_floor("zero_elevation_only"))
    with timer("os_cfar"):
        candidates = os_cfar_2d(ra_map, config.cfar, config.peak_grouping)
    full_power = (spectrum.mean_antenna_power("all")
                  if config.loading_reference == "frame" else None)
    min_level = config.noise_loading * spectrum.noise_floor("all")
    rres = cube.waveform.range_resolution
    points = []
    covs: dict[int, CovarianceMatrix] = {}
    for cand in candidates:
        with timer("elevation_capon"):
            cov = covs.get(cand.range_bin)
            if cov is None:
                cov = covs[cand.range_bin] = covariance(
                    spectrum, cand.range_bin, "all", config.loading, full_power, min_level)
            peaks = elevation_sweep(spectrum, cand, grid, config.loading, full_power,
                                    config.peak_rel_threshold, cov=cov)
        with timer("doppler"):
            for pk in peaks:
                dop = doppler_estimate(spectrum, cand.range_bin, pk.weights, cube.waveform,
                                       config.doppler_window)
                rng = cand.range_bin * rres
                points.append(RadarPoint(
                    position=rng * direction_vectors(cand.mu, pk.nu),
                    radial_velocity=dop.velocity,
                    power=pk.power,
                    mu=cand.mu,
                    nu=pk.nu,
                    range_bin=cand.range_bin,
                    mu_index=cand.mu_index,
                    nu_index=pk.nu_index,
                    doppler_bin=dop.doppler_bin,
                ))
    points.sort(key=lambda p: (p.range_bin, p.mu_index, p.nu_index))
    return points
