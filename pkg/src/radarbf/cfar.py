"""Two-dimensional ordered-statistic CFAR.

The noise level of each cell is the ``k``-th smallest value in a square
training ring around it (guard cells excluded).  The threshold scale is
derived from the desired false-alarm probability with the classic
exponential-noise relation::

    Pfa = prod_{i=0}^{k-1} (N - i) / (N - i + alpha)

Both the Capon range-azimuth map and the FFT range-Doppler map use this
module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage, optimize

from .errors import ConfigError


@dataclass(frozen=True)
class CfarParams:
    train_cells_per_side: int = 8
    guard_cells_per_side: int = 2
    rank_fraction: float = 0.75
    pfa: float = 1e-4
    scale_alpha: float | None = None
    # cells weaker than this fraction of the map maximum never detect;
    # keeps double-precision round-off in noiseless maps out of the output
    min_rel_power: float = 1e-20

    def __post_init__(self):
        if self.train_cells_per_side < 1 or self.guard_cells_per_side < 0:
            raise ConfigError("need >= 1 training and >= 0 guard cells per side")
        if not 0.0 < self.rank_fraction <= 1.0:
            raise ConfigError("rank_fraction must be in (0, 1]")
        if self.scale_alpha is None and not 0.0 < self.pfa < 1.0:
            raise ConfigError("pfa must be in (0, 1)")
        if self.scale_alpha is not None and self.scale_alpha <= 0:
            raise ConfigError("scale_alpha must be > 0")
        if not 0.0 <= self.min_rel_power < 1.0:
            raise ConfigError("min_rel_power must be in [0, 1)")

    @property
    def window(self) -> int:
        return 2 * (self.train_cells_per_side + self.guard_cells_per_side) + 1

    @property
    def num_train(self) -> int:
        return self.window ** 2 - (2 * self.guard_cells_per_side + 1) ** 2

    @property
    def rank(self) -> int:
        """1-based order of the statistic used as noise estimate."""
        return max(1, math.ceil(self.rank_fraction * self.num_train - 1e-9))

    @property
    def alpha(self) -> float:
        if self.scale_alpha is not None:
            return float(self.scale_alpha)
        return os_cfar_alpha(self.pfa, self.num_train, self.rank)


def os_cfar_pfa(alpha: float, n: int, k: int) -> float:
    i = np.arange(k)
    return float(np.exp(np.sum(np.log(n - i) - np.log(n - i + alpha))))


@lru_cache(maxsize=64)
def os_cfar_alpha(pfa: float, n: int, k: int) -> float:
    """Threshold scale giving false-alarm probability ``pfa``."""
    i = np.arange(k)
    target = math.log(pfa)

    def f(alpha):
        return np.sum(np.log(n - i) - np.log(n - i + alpha)) - target

    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-12))


def training_footprint(params: CfarParams) -> np.ndarray:
    w = params.window
    t = params.train_cells_per_side
    fp = np.ones((w, w), dtype=bool)
    fp[t:w - t, t:w - t] = False
    return fp


def noise_estimate(power: np.ndarray, params: CfarParams,
                   modes: tuple[str, str] = ("symmetric", "symmetric")) -> np.ndarray:
    """Per-cell ordered-statistic noise level ``Z``.

    Edges are extended with ``np.pad`` using one mode per axis, so every
    cell sees a full training ring.
    """
    power = np.asarray(power, dtype=float)
    w = params.window
    if power.ndim != 2 or power.shape[0] < w or power.shape[1] < w:
        raise ConfigError(f"map of shape {power.shape} is smaller than the "
                          f"{w}x{w} CFAR window")
    h = w // 2
    padded = np.pad(power, ((h, h), (0, 0)), mode=modes[0])
    padded = np.pad(padded, ((0, 0), (h, h)), mode=modes[1])
    z = ndimage.rank_filter(padded, params.rank - 1, footprint=training_footprint(params),
                            mode="nearest")
    return z[h:-h, h:-h]


def local_maxima(power: np.ndarray, wrap: tuple[bool, bool] = (False, False)) -> np.ndarray:
    """Cells that dominate their 3x3 neighbourhood.

    Plateaus resolve to a single cell: a neighbour with a lower flat index
    must be strictly smaller, one with a higher index only not larger.
    """
    p = np.asarray(power, dtype=float)
    padded = p
    for axis, w in enumerate(wrap):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (1, 1)
        if w:
            padded = np.pad(padded, pad, mode="wrap")
        else:
            padded = np.pad(padded, pad, mode="constant", constant_values=-np.inf)
    rows, cols = p.shape
    keep = np.ones(p.shape, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            nb = padded[1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols]
            if (dr, dc) < (0, 0):
                keep &= p > nb
            else:
                keep &= p >= nb
    return keep


@dataclass(frozen=True)
class CfarResult:
    cells: np.ndarray  # (n, 2) int, sorted row-major
    power: np.ndarray
    noise: np.ndarray  # Z per detection


def os_cfar(power: np.ndarray, params: CfarParams,
            modes: tuple[str, str] = ("symmetric", "symmetric"),
            peak_grouping: bool = True) -> CfarResult:
    """Detect cells with ``power > alpha * Z`` (and above the relative floor).

    With ``peak_grouping`` only detections that are also 3x3 local maxima
    are kept, so one extended response yields one detection.
    """
    power = np.asarray(power, dtype=float)
    z = noise_estimate(power, params, modes)
    hit = power > params.alpha * z
    if power.size:
        hit &= power > params.min_rel_power * power.max()
    if peak_grouping:
        hit &= local_maxima(power, wrap=tuple(m == "wrap" for m in modes))
    cells = np.argwhere(hit)
    return CfarResult(cells, power[hit], z[hit])
