import struct

import numpy as np
import pytest

from cidl import read_tensor, write_tensor
from cidl.errors import (
    BadDtypeError,
    BadMagicError,
    BadVersionError,
    TensorFormatError,
    TruncatedPayloadError,
)
from cidl.tensorio import MAGIC, VERSION


def test_round_trip_bit_exact_f64(tmp_path):
    rng = np.random.default_rng(0)
    for shape in [(5,), (3, 4), (2, 3, 4), (1, 1, 1, 7)]:
        arr = rng.random(shape)
        p = tmp_path / "t.tnsr"
        write_tensor(p, arr)
        back = read_tensor(p)
        assert back.shape == arr.shape
        assert back.dtype == np.float64
        assert back.tobytes() == arr.tobytes()


def test_round_trip_special_values(tmp_path):
    arr = np.array([0.0, -0.0, 1e-308, 1e308, np.pi])
    p = tmp_path / "s.tnsr"
    write_tensor(p, arr)
    assert read_tensor(p).tobytes() == arr.tobytes()


def test_f32_widens_to_f64(tmp_path):
    arr = np.array([[1.5, 2.25]], dtype=np.float32)
    p = tmp_path / "f.tnsr"
    write_tensor(p, arr)
    back = read_tensor(p)
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back, arr.astype(np.float64))


def test_int_input_written_as_f64(tmp_path):
    p = tmp_path / "i.tnsr"
    write_tensor(p, np.arange(6).reshape(2, 3))
    back = read_tensor(p)
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back, np.arange(6).reshape(2, 3))


def test_header_layout_golden_bytes(tmp_path):
    arr = np.array([[1.0, 2.0], [3.0, 4.0]])
    p = tmp_path / "g.tnsr"
    write_tensor(p, arr)
    raw = p.read_bytes()
    want = MAGIC + struct.pack("<IBB", VERSION, 2, 2) + struct.pack("<2Q", 2, 2)
    want += arr.tobytes()
    assert raw == want


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.tnsr"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 20)
    with pytest.raises(BadMagicError):
        read_tensor(p)
    p.write_bytes(b"short")
    with pytest.raises(BadMagicError):
        read_tensor(p)


def test_bad_version(tmp_path):
    p = tmp_path / "v.tnsr"
    p.write_bytes(MAGIC + struct.pack("<IBB", 99, 2, 1) + struct.pack("<Q", 0))
    with pytest.raises(BadVersionError):
        read_tensor(p)


def test_bad_dtype(tmp_path):
    p = tmp_path / "d.tnsr"
    p.write_bytes(MAGIC + struct.pack("<IBB", VERSION, 7, 1) + struct.pack("<Q", 0))
    with pytest.raises(BadDtypeError):
        read_tensor(p)


def test_truncated_header(tmp_path):
    p = tmp_path / "th.tnsr"
    p.write_bytes(MAGIC + struct.pack("<IBB", VERSION, 2, 3) + struct.pack("<Q", 2))
    with pytest.raises(TruncatedPayloadError):
        read_tensor(p)


def test_truncated_payload(tmp_path):
    arr = np.ones((4, 4))
    p = tmp_path / "tp.tnsr"
    write_tensor(p, arr)
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(TruncatedPayloadError):
        read_tensor(p)
    # extra trailing bytes are also rejected
    p.write_bytes(raw + b"\x00" * 4)
    with pytest.raises(TruncatedPayloadError):
        read_tensor(p)


def test_errors_share_base_class(tmp_path):
    p = tmp_path / "b.tnsr"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 20)
    with pytest.raises(TensorFormatError):
        read_tensor(p)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        read_tensor(tmp_path / "absent.tnsr")


def test_non_contiguous_input(tmp_path):
    arr = np.arange(24, dtype=float).reshape(4, 6)[:, ::2]
    p = tmp_path / "nc.tnsr"
    write_tensor(p, arr)
    np.testing.assert_array_equal(read_tensor(p), arr)
