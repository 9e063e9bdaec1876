"""Versioned binary parameter container.

Layout, all integers little-endian ``uint32``::

    magic                 6 ASCII bytes, e.g. b"HNNSO1"
    n_config              then n_config times: key_len, key, value_len, value (UTF-8)
    n_blocks              then n_blocks times:
        name_len, name    UTF-8
        ndim, dims[ndim]
        payload           prod(dims) little-endian float64, C order

Tensors keep the in-memory slice-major shape ``(n_slices, rows, cols)``.
Writing is deterministic for a given input, so identical models give
identical bytes.
"""

import struct
from pathlib import Path

import numpy as np

from .data import Scaler
from .errors import FormatError

MAGIC_HNNSO = b"HNNSO1"
MAGIC_MLP = b"MLP__1"
MAGIC_RIDGE = b"RIDGE1"


class CheckpointError(FormatError):
    pass


def _pack_str(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode(magic, config, blocks):
    if len(magic) != 6:
        raise ValueError(f"magic must be 6 bytes, got {magic!r}")
    parts = [magic, struct.pack("<I", len(config))]
    for key, value in config.items():
        parts += [_pack_str(str(key)), _pack_str(str(value))]
    parts.append(struct.pack("<I", len(blocks)))
    for name, arr in blocks.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        parts += [_pack_str(name), struct.pack("<I", arr.ndim), struct.pack(f"<{arr.ndim}I", *arr.shape)]
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


class _Reader:
    def __init__(self, buf, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"{self.path}: truncated checkpoint at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def string(self):
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"{self.path}: invalid UTF-8 near byte {self.pos}") from None


def decode(buf, expected_magic=None, path="<bytes>"):
    r = _Reader(buf, path)
    magic = r.take(6)
    if expected_magic is not None and magic != expected_magic:
        raise CheckpointError(f"{path}: magic {magic!r}, expected {expected_magic!r}")
    config = {}
    for _ in range(r.u32()):
        key = r.string()
        config[key] = r.string()
    blocks = {}
    for _ in range(r.u32()):
        name = r.string()
        ndim = r.u32()
        if ndim > 8:
            raise CheckpointError(f"{path}: block {name!r} claims {ndim} dimensions")
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        payload = r.take(8 * count)
        blocks[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - r.pos} trailing bytes")
    return magic, config, blocks


def write_container(path, magic, config, blocks):
    Path(path).write_bytes(encode(magic, config, blocks))


def read_container(path, expected_magic=None):
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc})") from None
    return decode(buf, expected_magic, path)


def scaler_blocks(prefix, scaler):
    if scaler is None:
        return {}
    return {
        f"{prefix}.a": scaler.a,
        f"{prefix}.b": scaler.b,
        f"{prefix}.constant": scaler.constant.astype(np.float64),
    }


def scaler_from_blocks(prefix, blocks):
    if f"{prefix}.a" not in blocks:
        return None
    return Scaler(blocks[f"{prefix}.a"], blocks[f"{prefix}.b"], blocks[f"{prefix}.constant"] > 0.5)
