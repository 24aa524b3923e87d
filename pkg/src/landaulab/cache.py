"""Content-addressed on-disk store for certified eigenpairs.

Entry layout (all little-endian)::

    uint64      header length H
    H bytes     UTF-8 JSON header: key, dims, k, tolerances, eigenvalues,
                residuals, sha256 of the array payload
    M*n f8      eigenvector real parts (row-major, M rows, n columns)
    M*n f8      eigenvector imaginary parts

Eigenvalues travel in the JSON header as shortest round-trip decimal
strings, so a hit reproduces them bit for bit.  Writes go to a temp file
in the cache directory followed by :func:`os.replace`; concurrent writers
for the same key race harmlessly (last writer wins, each file complete).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
import threading
from pathlib import Path

import numpy as np

from .spectral import Eigenpairs

__all__ = ["CacheCorruptError", "EigenCache", "cache_key"]

log = logging.getLogger(__name__)

FORMAT = "landaulab-eigencache-1"
_LEN = struct.Struct("<Q")


class CacheCorruptError(Exception):
    pass


def cache_key(model_dict: dict, k: int, grid, count: int, tol: float, seed: int) -> str:
    blob = json.dumps(
        {
            "format": FORMAT,
            "model": model_dict,
            "k": int(k),
            "grid": None if grid is None else [int(g) for g in grid],
            "count": int(count),
            "tol": float(tol),
            "seed": int(seed),
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def encode(pairs: Eigenpairs, meta: dict) -> bytes:
    V = np.ascontiguousarray(pairs.vectors, dtype=np.complex128)
    payload = V.real.astype("<f8").tobytes() + V.imag.astype("<f8").tobytes()
    header = dict(meta)
    header.update(
        format=FORMAT,
        dims=[int(V.shape[0]), int(V.shape[1])],
        eigenvalues=[repr(float(x)) for x in pairs.values],
        residuals=[repr(float(x)) for x in pairs.residuals],
        checksum=hashlib.sha256(payload).hexdigest(),
    )
    hb = json.dumps(header, sort_keys=True).encode()
    return _LEN.pack(len(hb)) + hb + payload


def decode(blob: bytes) -> tuple[Eigenpairs, dict]:
    if len(blob) < _LEN.size:
        raise CacheCorruptError("truncated entry")
    (n,) = _LEN.unpack_from(blob)
    try:
        header = json.loads(blob[_LEN.size : _LEN.size + n].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CacheCorruptError("unreadable header") from exc
    if header.get("format") != FORMAT:
        raise CacheCorruptError(f"unknown format {header.get('format')!r}")
    payload = blob[_LEN.size + n :]
    if hashlib.sha256(payload).hexdigest() != header.get("checksum"):
        raise CacheCorruptError("payload checksum mismatch")
    M, c = header["dims"]
    if len(payload) != 16 * M * c:
        raise CacheCorruptError("payload size does not match dims")
    arr = np.frombuffer(payload, dtype="<f8")
    V = (arr[: M * c] + 1j * arr[M * c :]).reshape(M, c)
    values = np.array([float(x) for x in header["eigenvalues"]])
    res = np.array([float(x) for x in header["residuals"]])
    return Eigenpairs(values=values, vectors=V, residuals=res), header


class EigenCache:
    """Directory of ``<sha256>.eig`` entries.

    ``policy`` is ``"readwrite"`` (default), ``"read"``, ``"write"`` or
    ``"off"``.  Corrupt entries are logged and treated as misses.
    """

    def __init__(self, root, policy: str = "readwrite"):
        if policy not in ("readwrite", "read", "write", "off"):
            raise ValueError(f"unknown cache policy {policy!r}")
        self.root = Path(root)
        self.policy = policy
        self.hits = 0
        self.misses = 0
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, key):
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    def path(self, key: str) -> Path:
        return self.root / f"{key}.eig"

    def get(self, key: str):
        if self.policy in ("off", "write"):
            return None
        p = self.path(key)
        if not p.exists():
            self.misses += 1
            return None
        try:
            pairs, _ = decode(p.read_bytes())
        except CacheCorruptError as exc:
            log.warning("ignoring cache entry %s: %s", p.name, exc)
            self.misses += 1
            return None
        self.hits += 1
        return pairs

    def put(self, key: str, pairs: Eigenpairs, meta: dict) -> None:
        if self.policy in ("off", "read"):
            return
        blob = encode(pairs, dict(meta, key=key))
        self.root.mkdir(parents=True, exist_ok=True)
        with self._lock(key):
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{key[:12]}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(blob)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self.path(key))
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
