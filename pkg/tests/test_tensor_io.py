import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from varmia.tensor_io import (TensorFormatError, decode_tensor, encode_tensor, load_tensor,
                              save_tensor)


def test_header_layout():
    blob = encode_tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
    assert blob[:4] == b"TNSR"
    assert blob[4] == 0 and blob[5] == 2
    assert struct.unpack("<II", blob[6:14]) == (2, 3)
    assert np.frombuffer(blob[14:], "<f4").tolist() == [0, 1, 2, 3, 4, 5]


@settings(max_examples=100, deadline=None)
@given(arrays(np.float32, st.lists(st.integers(1, 5), min_size=1, max_size=3).map(tuple),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_round_trip_is_lossless(arr):
    out = decode_tensor(encode_tensor(arr))
    assert out.shape == arr.shape
    assert out.tobytes() == arr.tobytes()


def test_file_round_trip(tmp_path):
    arr = np.random.default_rng(0).random((1, 4, 4), dtype=np.float32)
    save_tensor(tmp_path / "a.tnsr", arr)
    assert load_tensor(tmp_path / "a.tnsr").tobytes() == arr.tobytes()


@pytest.mark.parametrize("blob", [b"", b"XXXX\x00\x01\x01\x00\x00\x00", b"TNSR\x01\x01",
                                  b"TNSR\x00\x01\x02\x00\x00\x00\x00\x00"])
def test_malformed_blobs_rejected(blob):
    with pytest.raises(TensorFormatError):
        decode_tensor(blob)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        encode_tensor(np.array([1.0, np.nan], np.float32))
