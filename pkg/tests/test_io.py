import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radarbf import default_geometry, default_waveform
from radarbf.array_model import ArrayGeometry
from radarbf.errors import (
    BadMagicError,
    DimensionMismatchError,
    FormatError,
    TruncatedFileError,
    ValidationError,
)
from radarbf.metrics import PointCloud
from radarbf.radar_io import (
    BoardProfile,
    count_adc_frames,
    read_coloradar_adc,
    read_cube,
    read_cube_array,
    read_cube_header,
    read_pointcloud,
    write_coloradar_adc,
    write_cube,
    write_pointcloud,
)
from radarbf.capon import RadarPoint
from radarbf.scene import DataCube

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


def small_setup(m=2, k=2, s=4):
    wf = default_waveform(samples_per_chirp=s, chirps_per_frame=k)
    units = [[x, 0, 0] for x in range(m)]
    return wf, ArrayGeometry.from_half_wavelength(units, wf.wavelength)


# ---------------------------------------------------------------- cube files


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5), st.integers(1, 6), st.integers(1, 9), st.data())
def test_cube_cf32_round_trip(tmp_path_factory, m, k, s, data):
    wf, geo = small_setup(m, k, s)
    parts = data.draw(arrays(np.float32, (m, k, s, 2), elements=f32))
    x = parts[..., 0].astype(np.complex64) + 1j * parts[..., 1].astype(np.complex64)
    path = tmp_path_factory.mktemp("c") / "cube.bin"
    write_cube(path, DataCube(x, wf, geo))
    _, back = read_cube_array(path)
    assert back.dtype == np.complex64
    assert back.tobytes() == x.astype(np.complex64).tobytes()
    np.testing.assert_array_equal(read_cube(path, wf, geo).samples, x)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_cube_ci16_round_trip(tmp_path_factory, data):
    wf, geo = small_setup(3, 2, 5)
    ints = data.draw(arrays(np.int16, (3, 2, 5, 2)))
    x = ints[..., 0] + 1j * ints[..., 1].astype(float)
    path = tmp_path_factory.mktemp("c") / "cube.bin"
    write_cube(path, DataCube(x, wf, geo), "ci16")
    np.testing.assert_array_equal(read_cube(path, wf, geo).samples, x)
    # non-integers are rounded, out-of-range values refused
    write_cube(path, DataCube(x + 0.3, wf, geo), "ci16")
    np.testing.assert_array_equal(read_cube(path, wf, geo).samples, x)
    with pytest.raises(ValidationError):
        write_cube(path, DataCube(x * 0 + 40000, wf, geo), "ci16")


def test_hand_built_2x2x4(tmp_path):
    wf, geo = small_setup(2, 2, 4)
    vals = [complex(n, -n / 2) for n in range(16)]
    raw = b"RDCUBE01" + struct.pack("<4I", 2, 2, 4, 0)
    raw += b"".join(struct.pack("<2f", v.real, v.imag) for v in vals)
    path = tmp_path / "hand.bin"
    path.write_bytes(raw)
    cube = read_cube(path, wf, geo).samples
    # antenna-major, then chirp, then sample
    assert cube[1, 0, 2] == complex(10, -5)
    assert cube[0, 1, 3] == complex(7, -3.5)
    np.testing.assert_array_equal(cube.ravel(), vals)
    write_cube(tmp_path / "again.bin", DataCube(cube, wf, geo))
    assert (tmp_path / "again.bin").read_bytes() == raw
    # the same values in ci16
    raw16 = b"RDCUBE01" + struct.pack("<4I", 2, 2, 4, 1)
    raw16 += b"".join(struct.pack("<2h", n, -n) for n in range(16))
    path.write_bytes(raw16)
    np.testing.assert_array_equal(read_cube(path, wf, geo).samples.ravel(),
                                  [complex(n, -n) for n in range(16)])


def test_cube_errors(tmp_path):
    wf, geo = small_setup(2, 2, 4)
    good = tmp_path / "good.bin"
    write_cube(good, DataCube(np.ones((2, 2, 4)), wf, geo))
    raw = good.read_bytes()
    bad = tmp_path / "bad.bin"

    bad.write_bytes(b"RDCUBE02" + raw[8:])
    with pytest.raises(BadMagicError):
        read_cube(bad, wf, geo)
    bad.write_bytes(raw[:-1])
    with pytest.raises(TruncatedFileError):
        read_cube(bad, wf, geo)
    bad.write_bytes(raw[:10])
    with pytest.raises(TruncatedFileError):
        read_cube(bad, wf, geo)
    bad.write_bytes(raw + b"\0")
    with pytest.raises(FormatError):
        read_cube(bad, wf, geo)
    bad.write_bytes(raw[:8] + struct.pack("<4I", 2, 2, 4, 7) + raw[24:])
    with pytest.raises(FormatError):
        read_cube(bad, wf, geo)
    bad.write_bytes(raw[:8] + struct.pack("<4I", 0, 2, 4, 0))
    with pytest.raises(FormatError):
        read_cube(bad, wf, geo)
    wf3, geo3 = small_setup(3, 2, 4)
    with pytest.raises(DimensionMismatchError):
        read_cube(good, wf3, geo3)
    # the three errors are distinct types
    assert len({BadMagicError, TruncatedFileError, DimensionMismatchError}) == 3
    assert not issubclass(TruncatedFileError, BadMagicError)


def test_huge_declared_dims_not_allocated(tmp_path):
    path = tmp_path / "huge.bin"
    path.write_bytes(b"RDCUBE01" + struct.pack("<4I", 2 ** 32 - 1, 2 ** 32 - 1, 2 ** 32 - 1, 0))
    with pytest.raises(TruncatedFileError):
        read_cube_header(path)


# ---------------------------------------------------------------- vendor ADC


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["iq", "qi", "iiqq"]), st.integers(1, 3), st.integers(1, 3),
       st.integers(1, 4), st.integers(1, 3), st.data())
def test_adc_round_trip(tmp_path_factory, interleave, n_tx, n_rx, loops, half_s, data):
    s = 2 * half_s
    prof = BoardProfile(n_rx, n_tx, loops, s, interleave)
    wf = default_waveform(samples_per_chirp=s, chirps_per_frame=loops)
    m = n_tx * n_rx
    if m < 2:
        return
    geo = ArrayGeometry.from_half_wavelength([[x, 0, 0] for x in range(m)], wf.wavelength)
    frames = data.draw(st.integers(1, 3))
    cubes = []
    for _ in range(frames):
        ints = data.draw(arrays(np.int16, (m, loops, s, 2)))
        cubes.append(DataCube(ints[..., 0] + 1j * ints[..., 1].astype(float), wf, geo))
    path = tmp_path_factory.mktemp("adc") / "adc.bin"
    write_coloradar_adc(path, cubes, prof)
    assert count_adc_frames(path, prof) == frames
    for f, c in enumerate(cubes):
        np.testing.assert_array_equal(read_coloradar_adc(path, prof, wf, geo, f).samples, c.samples)


def test_adc_layout_by_hand(tmp_path):
    # 1 loop, 2 tx, 2 rx, 2 samples, "iq": words run loop > tx > rx > (i, q) pairs
    prof = BoardProfile(n_rx=2, n_tx=2, num_loops=1, num_samples=2)
    wf = default_waveform(samples_per_chirp=2, chirps_per_frame=1)
    geo = ArrayGeometry.from_half_wavelength([[x, 0, 0] for x in range(4)], wf.wavelength)
    words = np.arange(16, dtype="<i2")
    path = tmp_path / "adc.bin"
    path.write_bytes(words.tobytes())
    cube = read_coloradar_adc(path, prof, wf, geo).samples
    # virtual 3 = tx 1, rx 1 -> block 3 -> words 12..15
    np.testing.assert_array_equal(cube[3, 0], [12 + 13j, 14 + 15j])
    np.testing.assert_array_equal(cube[1, 0], [4 + 5j, 6 + 7j])
    qi = BoardProfile(n_rx=2, n_tx=2, num_loops=1, num_samples=2, interleave="qi")
    np.testing.assert_array_equal(read_coloradar_adc(path, qi, wf, geo).samples[0, 0], [1 + 0j, 3 + 2j])
    ii = BoardProfile(n_rx=2, n_tx=2, num_loops=1, num_samples=2, interleave="iiqq")
    np.testing.assert_array_equal(read_coloradar_adc(path, ii, wf, geo).samples[0, 0], [0 + 2j, 1 + 3j])


def test_adc_zero_and_bad_length(tmp_path):
    prof = BoardProfile()
    wf = default_waveform()
    geo = default_geometry(wf)
    path = tmp_path / "zero.bin"
    path.write_bytes(bytes(prof.frame_words * 2))
    assert not read_coloradar_adc(path, prof, wf, geo).samples.any()
    path.write_bytes(bytes(prof.frame_words * 2 - 2))
    with pytest.raises(FormatError):
        read_coloradar_adc(path, prof, wf, geo)
    path.write_bytes(b"")
    with pytest.raises(FormatError):
        count_adc_frames(path, prof)
    with pytest.raises(ValidationError):
        BoardProfile(interleave="xx")


# ---------------------------------------------------------------- point clouds


def test_pointcloud_empty(tmp_path):
    write_pointcloud([], tmp_path / "e.txt")
    assert (tmp_path / "e.txt").read_text() == "# x y z velocity power\n"
    write_pointcloud([], tmp_path / "e.bin", "binary")
    assert (tmp_path / "e.bin").read_bytes() == b"RDPTS001" + struct.pack("<I", 0)
    assert len(read_pointcloud(tmp_path / "e.bin")) == 0
    assert len(read_pointcloud(tmp_path / "e.txt")) == 0


def test_pointcloud_known_line(tmp_path):
    p = RadarPoint(np.array([1.0, 2.5, -0.125]), -3.75, 1234567.0, 0.1, 0.0, 3)
    write_pointcloud([p], tmp_path / "p.txt")
    assert (tmp_path / "p.txt").read_text().splitlines()[1] == "1 2.5 -0.125 -3.75 1.23457e+06"


def test_pointcloud_one_point_binary_exact(tmp_path):
    p = RadarPoint(np.array([0.5, 4.25, -1.0]), 2.0, 17.0, 0.1, 0.0, 3)
    write_pointcloud([p], tmp_path / "p.bin", "binary")
    back = read_pointcloud(tmp_path / "p.bin")
    np.testing.assert_array_equal(back.points, [[0.5, 4.25, -1.0]])
    assert back.velocity.tolist() == [2.0] and back.power.tolist() == [17.0]


@settings(max_examples=100, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(0, 30), st.just(5)), elements=f32))
def test_pointcloud_binary_round_trip(tmp_path_factory, rec):
    cloud = PointCloud(rec[:, :3], rec[:, 3], rec[:, 4])
    d = tmp_path_factory.mktemp("pc")
    write_pointcloud(cloud, d / "a.bin", "binary")
    back = read_pointcloud(d / "a.bin")
    got = np.column_stack([back.points, back.velocity, back.power]).astype(np.float32)
    assert got.tobytes() == rec.tobytes()
    write_pointcloud(back, d / "b.bin", "binary")
    assert (d / "a.bin").read_bytes() == (d / "b.bin").read_bytes()


def test_pointcloud_errors(tmp_path):
    path = tmp_path / "p.bin"
    path.write_bytes(b"RDPTS001" + struct.pack("<I", 3) + bytes(20))
    with pytest.raises(TruncatedFileError):
        read_pointcloud(path)
    txt = tmp_path / "p.txt"
    txt.write_text("# x y z velocity power\n1 2 3\n")
    with pytest.raises(FormatError):
        read_pointcloud(txt)
    with pytest.raises(ValidationError):
        write_pointcloud([], tmp_path / "x", "csv")
