import struct
import threading

import numpy as np
import pytest

from landaulab.cache import CacheCorruptError, EigenCache, cache_key, decode, encode
from landaulab.spectral import Eigenpairs


def _pairs(rng, M=12, n=3):
    V = rng.standard_normal((M, n)) + 1j * rng.standard_normal((M, n))
    return Eigenpairs(values=rng.standard_normal(n) * 1e3, vectors=V, residuals=rng.random(n) * 1e-12)


def test_roundtrip_bit_identical(rng):
    p = _pairs(rng)
    q, header = decode(encode(p, {"k": 3}))
    assert q.values.tobytes() == p.values.tobytes()
    assert q.vectors.tobytes() == p.vectors.tobytes()
    assert q.residuals.tobytes() == p.residuals.tobytes()
    assert header["k"] == 3 and header["dims"] == [12, 3]


def test_layout(rng):
    p = _pairs(rng, M=4, n=2)
    blob = encode(p, {})
    (n,) = struct.unpack_from("<Q", blob)
    payload = blob[8 + n :]
    assert len(payload) == 2 * 4 * 2 * 8
    re = np.frombuffer(payload[:64], dtype="<f8").reshape(4, 2)
    np.testing.assert_array_equal(re, p.vectors.real)


def test_checksum_detects_corruption(rng):
    blob = bytearray(encode(_pairs(rng), {}))
    blob[-3] ^= 0xFF
    with pytest.raises(CacheCorruptError, match="checksum"):
        decode(bytes(blob))
    with pytest.raises(CacheCorruptError):
        decode(b"\x01")


def test_key_content_addressed():
    a = cache_key({"model": "sphere", "N": 1}, 4, None, 10, 1e-8, 1)
    assert a == cache_key({"N": 1, "model": "sphere"}, 4, None, 10, 1e-8, 1)
    assert a != cache_key({"model": "sphere", "N": 1}, 5, None, 10, 1e-8, 1)
    assert a != cache_key({"model": "sphere", "N": 1}, 4, None, 10, 1e-9, 1)


def test_store_get_and_corrupt_entry_is_a_miss(tmp_path, rng):
    c = EigenCache(tmp_path)
    p = _pairs(rng)
    assert c.get("abc") is None
    c.put("abc", p, {})
    assert c.get("abc").values.tobytes() == p.values.tobytes()
    raw = bytearray(c.path("abc").read_bytes())
    raw[-1] ^= 1
    c.path("abc").write_bytes(bytes(raw))
    assert c.get("abc") is None
    assert c.hits == 1 and c.misses == 2


def test_policies(tmp_path, rng):
    p = _pairs(rng)
    EigenCache(tmp_path, "read").put("x", p, {})
    assert not (tmp_path / "x.eig").exists()
    EigenCache(tmp_path, "write").put("x", p, {})
    assert EigenCache(tmp_path, "write").get("x") is None
    assert EigenCache(tmp_path, "read").get("x") is not None
    with pytest.raises(ValueError):
        EigenCache(tmp_path, "sometimes")


def test_concurrent_writers_same_key(tmp_path, rng):
    c = EigenCache(tmp_path)
    ps = [_pairs(rng) for _ in range(6)]
    ts = [threading.Thread(target=c.put, args=("k", p, {})) for p in ps]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    got = c.get("k")
    assert any(got.values.tobytes() == p.values.tobytes() for p in ps)
    assert not list(tmp_path.glob("*.tmp"))
