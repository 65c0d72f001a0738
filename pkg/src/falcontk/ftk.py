"""FTK binary tensor container.

Layout (all integers little-endian)::

    magic         8 bytes  b"FALCONTK"
    version       u32      1
    dtype         u8       0 = binary32, 1 = binary64
    tensor_count  u32
    per tensor:
        name_len  u32
        name      UTF-8, no terminator
        ndim      u32
        extents   ndim x u32
        payload   row-major little-endian scalars of the file dtype

binary32 payloads are widened to float64 on read and rounded to nearest
(ties to even) on write.
"""
from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"FALCONTK"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
DTYPE_CODES = {"f4": 0, "float32": 0, "f8": 1, "float64": 1}


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise FormatError(
                f"truncated file: {what} needs {n} bytes at offset {self.pos}, "
                f"only {len(self.buf) - self.pos} remain"
            )
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]


def decode_ftk(buf: bytes) -> tuple[dict, str]:
    """Parse FTK bytes into ``({name: float64 array}, dtype)`` with dtype "f4" or "f8"."""
    r = _Reader(buf)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic at offset 0: expected {MAGIC!r}, found {magic!r}")
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 8 (expected {VERSION})")
    code = r.u8("dtype")
    if code not in DTYPES:
        raise FormatError(f"unsupported dtype code {code} at offset 12 (expected 0 or 1)")
    dtype = DTYPES[code]
    count = r.u32("tensor_count")
    tensors = {}
    for idx in range(count):
        start = r.pos
        name_len = r.u32(f"name_len of tensor {idx}")
        raw = r.take(name_len, f"name of tensor {idx}")
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"tensor {idx} name at offset {start + 4} is not valid UTF-8") from exc
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r} at offset {start}")
        ndim = r.u32(f"ndim of tensor {name!r}")
        if ndim < 1:
            raise FormatError(f"tensor {name!r} at offset {start} has ndim 0")
        extents = struct.unpack(f"<{ndim}I", r.take(4 * ndim, f"extents of tensor {name!r}"))
        if any(e < 1 for e in extents):
            raise FormatError(f"tensor {name!r} at offset {start} has a zero extent {extents}")
        nbytes = math.prod(extents) * dtype.itemsize
        payload = r.take(nbytes, f"payload of tensor {name!r}")
        arr = np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(extents)
        tensors[name] = arr
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after last tensor at offset {r.pos}")
    return tensors, "f4" if code == 0 else "f8"


def encode_ftk(tensors: dict, dtype: str = "f8") -> bytes:
    if dtype not in DTYPE_CODES:
        raise FormatError(f"unsupported dtype {dtype!r}; use 'f4' or 'f8'")
    code = DTYPE_CODES[dtype]
    out = [MAGIC, struct.pack("<IBI", VERSION, code, len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if any(e < 1 for e in arr.shape):
            raise FormatError(f"tensor {name!r} has a zero extent {arr.shape}")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        out.append(np.ascontiguousarray(arr).astype(DTYPES[code]).tobytes())
    return b"".join(out)


def read_ftk(path) -> dict:
    """Load every tensor of an FTK file as float64 arrays, in file order."""
    return decode_ftk(Path(path).read_bytes())[0]


def write_ftk(path, tensors: dict, dtype: str = "f8") -> None:
    Path(path).write_bytes(encode_ftk(tensors, dtype))


# Reserved tensor names for factor files.

def factors_to_tensors(factors) -> dict:
    from .gep import DpconvFactors, FalconFactors

    if isinstance(factors, FalconFactors):
        named = {f"P.{r}": P for r, P in enumerate(factors.pointwise)}
        named.update({f"D.{r}": Dk for r, Dk in enumerate(factors.depthwise)})
        return named
    if isinstance(factors, DpconvFactors):
        return {"D": factors.depthwise, "P": factors.pointwise}
    raise TypeError(f"cannot serialize {type(factors).__name__}")


def tensors_to_factors(tensors: dict):
    """Rebuild FalconFactors ("P.r"/"D.r") or DpconvFactors ("D"/"P")."""
    from .gep import DpconvFactors, FalconFactors

    names = set(tensors)
    if names == {"D", "P"}:
        return DpconvFactors(tensors["D"], tensors["P"])
    k = len(names) // 2
    expected = {f"P.{r}" for r in range(k)} | {f"D.{r}" for r in range(k)}
    if k < 1 or names != expected:
        raise FormatError(
            f"not a factor file: expected names P.0..P.{{k-1}}, D.0..D.{{k-1}} or D, P; "
            f"found {sorted(names)}"
        )
    return FalconFactors(
        tuple(tensors[f"P.{r}"] for r in range(k)),
        tuple(tensors[f"D.{r}"] for r in range(k)),
    )
