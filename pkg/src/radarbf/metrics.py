"""Point-cloud quality metrics.

Chamfer distance here is the symmetric mean of means::

    CD(A, B) = 0.5 * mean_a min_b |a - b| + 0.5 * mean_b min_a |a - b|

Nearest neighbours come from :class:`scipy.spatial.cKDTree`, which is
exact.  ``recovery_report`` scores a pipeline output against the scene
that generated it, in grid/bin units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .array_model import DirectionGrid, WaveformConfig
from .errors import ValidationError
from .scene import ExpectedDetection, Scene, expected_detection


class EmptyCloudError(ValidationError):
    """Raised when a metric needs a nonempty cloud."""


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, 3) meters
    velocity: np.ndarray | None = None
    power: np.ndarray | None = None
    frame_id: int = 0

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValidationError("point coordinates must be finite")
        object.__setattr__(self, "points", p)
        for name in ("velocity", "power"):
            ch = getattr(self, name)
            if ch is not None:
                ch = np.asarray(ch, dtype=float).reshape(-1)
                if ch.shape[0] != p.shape[0]:
                    raise ValidationError(f"{name} has {ch.shape[0]} entries for {p.shape[0]} points")
                object.__setattr__(self, name, ch)

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def from_radar_points(cls, points, frame_id: int = 0) -> "PointCloud":
        pts = list(points)
        if not pts:
            return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0), frame_id)
        return cls(np.array([p.position for p in pts]),
                   np.array([p.radial_velocity for p in pts]),
                   np.array([p.power for p in pts]), frame_id)

    @classmethod
    def from_scene(cls, scene: Scene) -> "PointCloud":
        """Exact scatterer positions (ground truth)."""
        s = scene.scatterers
        pos = np.array([x.position for x in s]) if s else np.zeros((0, 3))
        return cls(pos, np.array([x.radial_velocity for x in s]),
                   np.array([x.amplitude ** 2 for x in s]))


def voxel_downsample(cloud: PointCloud, resolution: float) -> PointCloud:
    """Replace the points of every occupied voxel by their centroid.

    Voxels are axis-aligned cubes of edge ``resolution`` anchored at the
    origin.  Optional channels are averaged the same way.  Output is
    ordered by voxel key.
    """
    if not resolution > 0:
        raise ValidationError("resolution must be > 0")
    n = len(cloud)
    if n == 0:
        return cloud
    keys = np.floor(cloud.points / resolution).astype(np.int64)
    _, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)

    def mean(values):
        if values is None:
            return None
        acc = np.zeros((len(counts),) + values.shape[1:])
        np.add.at(acc, inv, values)
        return acc / counts.reshape((-1,) + (1,) * (values.ndim - 1))

    return PointCloud(mean(cloud.points), mean(cloud.velocity), mean(cloud.power),
                      cloud.frame_id)


def nearest_distances(query: np.ndarray, ref: np.ndarray) -> np.ndarray:
    d, _ = cKDTree(ref).query(query, k=1)
    return np.asarray(d, dtype=float)


def chamfer_distance(a: PointCloud, b: PointCloud) -> float:
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloudError("chamfer distance needs two nonempty clouds")
    ab = nearest_distances(a.points, b.points).mean()
    ba = nearest_distances(b.points, a.points).mean()
    return float(0.5 * (ab + ba))


@dataclass(frozen=True)
class ChamferRow:
    resolution: float
    estimate_points: int
    truth_points: int
    chamfer: float


def chamfer_table(estimate: PointCloud, truth: PointCloud, resolutions) -> list[ChamferRow]:
    """Chamfer distance after voxel downsampling both clouds at each resolution."""
    rows = []
    for r in resolutions:
        e, t = voxel_downsample(estimate, r), voxel_downsample(truth, r)
        rows.append(ChamferRow(float(r), len(e), len(t), chamfer_distance(e, t)))
    return rows


def format_chamfer_table(rows: list[ChamferRow]) -> str:
    lines = ["# resolution_m estimate_points truth_points chamfer_m"]
    lines += [f"{r.resolution:g} {r.estimate_points} {r.truth_points} {r.chamfer:.6g}"
              for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- recovery


@dataclass(frozen=True)
class ScattererMatch:
    index: int
    expected: ExpectedDetection
    point_index: int | None  # None when missed
    # signed errors in bins: range/mu/nu against the expected bins,
    # Doppler against the true (fractional) velocity
    errors: tuple[float, float, float, float] | None = None


@dataclass(frozen=True)
class RecoveryReport:
    matches: list[ScattererMatch]
    num_points: int
    false_detections: int
    mean_abs_error: dict = field(default_factory=dict)

    @property
    def true_positives(self) -> int:
        return sum(m.point_index is not None for m in self.matches)

    @property
    def recall(self) -> float:
        """Matched fraction of scatterers (1.0 for an empty scene)."""
        n = len(self.matches)
        return self.true_positives / n if n else 1.0

    @property
    def precision(self) -> float:
        """Matched fraction of points (1.0 when nothing was reported)."""
        return self.true_positives / self.num_points if self.num_points else 1.0

    def to_text(self) -> str:
        lines = [
            f"scatterers = {len(self.matches)}",
            f"points = {self.num_points}",
            f"true_positives = {self.true_positives}",
            f"false_detections = {self.false_detections}",
            f"precision = {self.precision:.6g}",
            f"recall = {self.recall:.6g}",
        ]
        for axis in ("range", "mu", "nu", "doppler"):
            lines.append(f"mean_abs_error_{axis}_bins = {self.mean_abs_error.get(axis, math.nan):.6g}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = ["# scatterer range_bin mu_bin nu_bin doppler_bin matched point "
                 "err_range err_mu err_nu err_doppler"]
        for m in self.matches:
            e = m.expected
            head = f"{m.index} {e.range_bin} {e.mu_bin} {e.nu_bin} {e.doppler_bin}"
            if m.point_index is None:
                lines.append(f"{head} 0 - - - - -")
            else:
                er = " ".join(f"{x:.6g}" for x in m.errors)
                lines.append(f"{head} 1 {m.point_index} {er}")
        return "\n".join(lines) + "\n"


def _point_bins(p, waveform: WaveformConfig, grid: DirectionGrid):
    if getattr(p, "range_bin", None) is not None:
        rb = p.range_bin
    else:
        rb = round(float(np.linalg.norm(p.position)) / waveform.range_resolution)
    return (rb, grid.mu_index(p.mu), grid.nu_index(p.nu),
            p.radial_velocity / waveform.velocity_resolution)


def recovery_report(points, scene: Scene, waveform: WaveformConfig,
                    grid: DirectionGrid | None = None) -> RecoveryReport:
    """Match points to scatterers and summarize.

    A point matches a scatterer when its range, mu and nu bins are each
    within one bin of the expected ones and its velocity is within half a
    Doppler bin of the true velocity (modulo the unambiguous span).  Pairs are matched
    greedily, closest first, each point and scatterer used at most once.
    """
    grid = grid or DirectionGrid()
    points = list(points)
    K = waveform.chirps_per_frame
    expected = [expected_detection(s, waveform, grid) for s in scene.scatterers]
    true_dop = [s.radial_velocity / waveform.velocity_resolution for s in scene.scatterers]
    pbins = [_point_bins(p, waveform, grid) for p in points]
    pairs = []
    for i, e in enumerate(expected):
        for j, (rb, mb, nb, db) in enumerate(pbins):
            dd = (db - true_dop[i] + K / 2) % K - K / 2
            err = (rb - e.range_bin, mb - e.mu_bin, nb - e.nu_bin, dd)
            if max(abs(err[0]), abs(err[1]), abs(err[2])) <= 1 and abs(dd) <= 0.5:
                pairs.append((sum(x * x for x in err), i, j, err))
    pairs.sort(key=lambda t: (t[0], t[1], t[2]))
    used_s, used_p, found = set(), set(), {}
    for _, i, j, err in pairs:
        if i in used_s or j in used_p:
            continue
        used_s.add(i)
        used_p.add(j)
        found[i] = (j, tuple(float(x) for x in err))
    matches = [ScattererMatch(i, e, *found.get(i, (None, None))) for i, e in enumerate(expected)]
    mae = {}
    if found:
        errs = np.abs(np.array([v[1] for v in found.values()]))
        mae = dict(zip(("range", "mu", "nu", "doppler"), errs.mean(axis=0).tolist()))
    return RecoveryReport(matches, len(points), len(points) - len(found), mae)
