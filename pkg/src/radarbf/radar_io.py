"""Binary and text file formats.

Cube file (little-endian)::

    offset 0   8 bytes   magic b"RDCUBE01"
    offset 8   u32       M antennas
    offset 12  u32       K chirps
    offset 16  u32       S samples per chirp
    offset 20  u32       sample format: 0 = cf32, 1 = ci16
    offset 24  payload   M*K*S complex samples, antenna-major, then chirp,
                         then sample; each sample is (re, im) as two
                         float32 (cf32) or two int16 (ci16)

Point-cloud binary file::

    offset 0   8 bytes   magic b"RDPTS001"
    offset 8   u32       N points
    offset 12  payload   N records of five float32: x y z velocity power

Point-cloud table file: a ``# x y z velocity power`` header line, then one
point per line, fields space separated with 6 significant digits.

Raw vendor ADC frames (DCA1000-style capture, int16) are read through a
:class:`BoardProfile`; within a frame chirps are ordered loop-major, then
transmitter, and each chirp holds all receivers one after another.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .array_model import ArrayGeometry, WaveformConfig, round_half_down
from .capon import RadarPoint
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    TruncatedFileError,
    ValidationError,
)
from .metrics import PointCloud
from .scene import DataCube

CUBE_MAGIC = b"RDCUBE01"
POINTS_MAGIC = b"RDPTS001"
CF32, CI16 = 0, 1
_CUBE_HEADER = struct.Struct("<8s4I")
_POINTS_HEADER = struct.Struct("<8sI")
_SAMPLE_DTYPES = {CF32: np.dtype("<f4"), CI16: np.dtype("<i2")}
_FORMAT_NAMES = {"cf32": CF32, "ci16": CI16}
TABLE_HEADER = "# x y z velocity power"


@dataclass(frozen=True)
class CubeFileHeader:
    m_antennas: int
    k_chirps: int
    s_samples: int
    sample_format: int

    @property
    def num_samples(self) -> int:
        return self.m_antennas * self.k_chirps * self.s_samples

    @property
    def payload_bytes(self) -> int:
        return self.num_samples * 2 * _SAMPLE_DTYPES[self.sample_format].itemsize


def _to_int16(values: np.ndarray, what: str) -> np.ndarray:
    r = np.rint(values)
    if np.any(r < -32768) or np.any(r > 32767):
        raise ValidationError(f"{what} exceeds the int16 range")
    return r.astype("<i2")


def _interleave(samples: np.ndarray) -> np.ndarray:
    out = np.empty(samples.shape + (2,), dtype=float)
    out[..., 0] = samples.real
    out[..., 1] = samples.imag
    return out


def write_cube(path, cube: DataCube, sample_format: str = "cf32") -> None:
    """Write ``cube``; ``ci16`` rounds each component to the nearest integer."""
    if sample_format not in _FORMAT_NAMES:
        raise ValidationError(f"sample_format must be one of {sorted(_FORMAT_NAMES)}")
    fmt = _FORMAT_NAMES[sample_format]
    iq = _interleave(cube.samples)
    payload = iq.astype("<f4") if fmt == CF32 else _to_int16(iq, "cube sample")
    M, K, S = cube.shape
    with open(path, "wb") as fh:
        fh.write(_CUBE_HEADER.pack(CUBE_MAGIC, M, K, S, fmt))
        fh.write(payload.tobytes(order="C"))


def read_cube_header(path) -> CubeFileHeader:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        raw = fh.read(_CUBE_HEADER.size)
    if len(raw) >= 8 and raw[:8] != CUBE_MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:8]!r}")
    if len(raw) < _CUBE_HEADER.size:
        raise TruncatedFileError(f"{path}: header needs {_CUBE_HEADER.size} bytes, file has {size}")
    _, m, k, s, fmt = _CUBE_HEADER.unpack(raw)
    if fmt not in _SAMPLE_DTYPES:
        raise FormatError(f"{path}: unknown sample format {fmt}")
    if min(m, k, s) == 0:
        raise FormatError(f"{path}: declared dimensions must be positive, got {(m, k, s)}")
    header = CubeFileHeader(m, k, s, fmt)
    # checked against the real file size before anything is allocated
    expected = _CUBE_HEADER.size + header.payload_bytes
    if size < expected:
        raise TruncatedFileError(f"{path}: payload needs {expected} bytes, file has {size}")
    if size > expected:
        raise FormatError(f"{path}: {size - expected} trailing bytes after payload")
    return header


def read_cube_array(path) -> tuple[CubeFileHeader, np.ndarray]:
    """Header plus complex samples of shape ``(M, K, S)``."""
    h = read_cube_header(path)
    dt = _SAMPLE_DTYPES[h.sample_format]
    with open(path, "rb") as fh:
        fh.seek(_CUBE_HEADER.size)
        iq = np.fromfile(fh, dtype=dt, count=2 * h.num_samples)
    if iq.size != 2 * h.num_samples:
        raise TruncatedFileError(f"{path}: payload ended early")
    iq = iq.reshape(h.m_antennas, h.k_chirps, h.s_samples, 2)
    if h.sample_format == CF32:
        samples = np.empty(iq.shape[:-1], dtype=np.complex64)
    else:
        samples = np.empty(iq.shape[:-1], dtype=np.complex128)
    samples.real, samples.imag = iq[..., 0], iq[..., 1]
    return h, samples


def read_cube(path, waveform: WaveformConfig, geometry: ArrayGeometry) -> DataCube:
    """Read a cube file and check it against the expected dimensions.

    Raises
    ------
    BadMagicError, TruncatedFileError, FormatError
        Malformed file.
    DimensionMismatchError
        Declared (M, K, S) differ from ``geometry`` and ``waveform``.
    """
    h, samples = read_cube_array(path)
    expected = (geometry.num_antennas, waveform.chirps_per_frame, waveform.samples_per_chirp)
    got = (h.m_antennas, h.k_chirps, h.s_samples)
    if got != expected:
        raise DimensionMismatchError(f"{path}: file holds (M, K, S) = {got}, "
                                     f"configuration expects {expected}")
    return DataCube(samples.astype(np.complex128), waveform, geometry)


# ---------------------------------------------------------------- vendor ADC


@dataclass(frozen=True)
class BoardProfile:
    """Layout of a raw int16 ADC capture.

    ``interleave`` names the order of real (I) and imaginary (Q) words:
    ``"iq"`` and ``"qi"`` alternate per sample, ``"iiqq"`` stores two I
    words then the two matching Q words (requires an even ``num_samples``).
    """

    n_rx: int = 4
    n_tx: int = 3
    num_loops: int = 64     # K chirps per transmitter per frame
    num_samples: int = 128  # S
    interleave: str = "iq"

    def __post_init__(self):
        if min(self.n_rx, self.n_tx, self.num_loops, self.num_samples) < 1:
            raise ValidationError("board profile sizes must be positive")
        if self.interleave not in ("iq", "qi", "iiqq"):
            raise ValidationError("interleave must be 'iq', 'qi' or 'iiqq'")
        if self.interleave == "iiqq" and self.num_samples % 2:
            raise ValidationError("'iiqq' interleave needs an even sample count")

    @property
    def num_virtual(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def frame_words(self) -> int:
        return self.num_loops * self.n_tx * self.n_rx * self.num_samples * 2


def _words_to_complex(words: np.ndarray, interleave: str) -> np.ndarray:
    """int16 words of one chirp block (last axis) to complex samples."""
    w = words.astype(float)
    if interleave == "iq":
        return w[..., 0::2] + 1j * w[..., 1::2]
    if interleave == "qi":
        return w[..., 1::2] + 1j * w[..., 0::2]
    q4 = w.reshape(w.shape[:-1] + (-1, 4))
    i = q4[..., 0:2].reshape(w.shape[:-1] + (-1,))
    q = q4[..., 2:4].reshape(w.shape[:-1] + (-1,))
    return i + 1j * q


def _complex_to_words(samples: np.ndarray, interleave: str) -> np.ndarray:
    i = _to_int16(samples.real, "ADC sample")
    q = _to_int16(samples.imag, "ADC sample")
    out = np.empty(samples.shape[:-1] + (2 * samples.shape[-1],), dtype="<i2")
    if interleave == "iq":
        out[..., 0::2], out[..., 1::2] = i, q
    elif interleave == "qi":
        out[..., 0::2], out[..., 1::2] = q, i
    else:
        o4 = out.reshape(out.shape[:-1] + (-1, 4))
        o4[..., 0:2] = i.reshape(i.shape[:-1] + (-1, 2))
        o4[..., 2:4] = q.reshape(q.shape[:-1] + (-1, 2))
    return out


def count_adc_frames(path, profile: BoardProfile) -> int:
    size = os.path.getsize(path)
    frame_bytes = profile.frame_words * 2
    if size == 0 or size % frame_bytes:
        raise FormatError(f"{path}: {size} bytes is not a whole number of "
                          f"{frame_bytes}-byte frames")
    return size // frame_bytes


def read_coloradar_adc(path, profile: BoardProfile, waveform: WaveformConfig,
                       geometry: ArrayGeometry, frame: int = 0) -> DataCube:
    """Decode one frame of a raw capture into canonical antenna order.

    Virtual antenna ``tx * n_rx + rx`` receives chirp ``loop`` of
    transmitter ``tx`` as its slow-time sample ``loop``.
    """
    n = count_adc_frames(path, profile)
    if not 0 <= frame < n:
        raise ValidationError(f"frame {frame} out of range, file holds {n}")
    if (geometry.num_antennas, waveform.chirps_per_frame, waveform.samples_per_chirp) != (
            profile.num_virtual, profile.num_loops, profile.num_samples):
        raise DimensionMismatchError("board profile does not match waveform/geometry sizes")
    with open(path, "rb") as fh:
        fh.seek(frame * profile.frame_words * 2)
        words = np.fromfile(fh, dtype="<i2", count=profile.frame_words)
    words = words.reshape(profile.num_loops, profile.n_tx, profile.n_rx, 2 * profile.num_samples)
    x = _words_to_complex(words, profile.interleave)  # (loop, tx, rx, S)
    cube = x.transpose(1, 2, 0, 3).reshape(profile.num_virtual, profile.num_loops,
                                            profile.num_samples)
    return DataCube(cube, waveform, geometry)


def write_coloradar_adc(path, cubes, profile: BoardProfile) -> None:
    """Inverse of :func:`read_coloradar_adc` for one cube or a sequence of them."""
    if isinstance(cubes, DataCube):
        cubes = [cubes]
    with open(path, "wb") as fh:
        for cube in cubes:
            if cube.shape != (profile.num_virtual, profile.num_loops, profile.num_samples):
                raise DimensionMismatchError(f"cube shape {cube.shape} does not match profile")
            x = cube.samples.reshape(profile.n_tx, profile.n_rx, profile.num_loops,
                                     profile.num_samples).transpose(2, 0, 1, 3)
            fh.write(_complex_to_words(x, profile.interleave).tobytes(order="C"))


# ---------------------------------------------------------------- point clouds


def _records(points) -> np.ndarray:
    if isinstance(points, PointCloud):
        n = len(points)
        vel = points.velocity if points.velocity is not None else np.zeros(n)
        pw = points.power if points.power is not None else np.zeros(n)
        return np.column_stack([points.points, vel, pw]) if n else np.zeros((0, 5))
    pts = list(points)
    if not pts:
        return np.zeros((0, 5))
    return np.array([[*p.position, p.radial_velocity, p.power] for p in pts], dtype=float)


def write_pointcloud(points, path, fmt: str = "table") -> None:
    """Write RadarPoints or a PointCloud as ``table`` text or ``binary``.

    Binary records are float32, so a cloud read back from a binary file
    rewrites to identical bytes.
    """
    rec = _records(points)
    if fmt == "table":
        lines = [TABLE_HEADER] + [" ".join(f"{v:.6g}" for v in row) for row in rec]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(_POINTS_HEADER.pack(POINTS_MAGIC, rec.shape[0]))
            fh.write(rec.astype("<f4").tobytes())
    else:
        raise ValidationError("point-cloud format must be 'table' or 'binary'")


def read_pointcloud(path) -> PointCloud:
    """Read either point-cloud format; the binary magic selects the decoder."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == POINTS_MAGIC:
        return _read_points_binary(path)
    return _read_points_table(path)


def _read_points_binary(path) -> PointCloud:
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        raw = fh.read(_POINTS_HEADER.size)
        if len(raw) < _POINTS_HEADER.size:
            raise TruncatedFileError(f"{path}: point header truncated")
        _, n = _POINTS_HEADER.unpack(raw)
        expected = _POINTS_HEADER.size + 20 * n
        if size < expected:
            raise TruncatedFileError(f"{path}: {n} points need {expected} bytes, file has {size}")
        if size > expected:
            raise FormatError(f"{path}: {size - expected} trailing bytes")
        rec = np.fromfile(fh, dtype="<f4", count=5 * n).reshape(n, 5)
    return PointCloud(rec[:, :3], rec[:, 3], rec[:, 4])


def _read_points_table(path) -> PointCloud:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise FormatError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    rec = np.array(rows, dtype=float).reshape(-1, 5)
    return PointCloud(rec[:, :3], rec[:, 3], rec[:, 4])


def cloud_to_radar_points(cloud: PointCloud, waveform: WaveformConfig) -> list[RadarPoint]:
    """Recover direction and range bin from stored positions."""
    out = []
    vel = cloud.velocity if cloud.velocity is not None else np.zeros(len(cloud))
    pw = cloud.power if cloud.power is not None else np.zeros(len(cloud))
    for p, v, w in zip(cloud.points, vel, pw):
        rng = float(np.linalg.norm(p))
        mu, nu = (p[0] / rng, p[2] / rng) if rng > 0 else (0.0, 0.0)
        out.append(RadarPoint(
            position=np.array(p, dtype=float), radial_velocity=float(v), power=float(w),
            mu=float(mu), nu=float(nu),
            range_bin=round_half_down(rng / waveform.range_resolution)))
    return out
