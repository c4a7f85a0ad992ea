"""Portable binary weight archive (SMDW format).

Layout, all little-endian:
    magic "SMDW" | u32 version (= 1) | u32 tensor count
    per tensor: u32 name length | UTF-8 name | u32 rank | rank * u32 dims
                | raw float32 payload
    trailing u32 CRC32 of all preceding bytes

Readers reject unknown versions and bad CRCs. Tensors keep insertion
order, so write -> read -> write round-trips byte-identically.
"""

import struct
import zlib

import numpy as np

MAGIC = b"SMDW"
VERSION = 1


class WeightArchiveError(Exception):
    """Raised for malformed, truncated, or corrupted archives."""


class WeightArchive:
    """Ordered name -> float32 ndarray collection, immutable after load."""

    def __init__(self, tensors: dict | None = None):
        self._tensors: dict[str, np.ndarray] = {}
        if tensors:
            for name, arr in tensors.items():
                self.add(name, arr)

    def add(self, name: str, arr: np.ndarray) -> None:
        if name in self._tensors:
            raise WeightArchiveError(f"duplicate tensor name {name!r}")
        self._tensors[name] = np.ascontiguousarray(arr, dtype=np.float32)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise WeightArchiveError(f"archive has no tensor {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<II", VERSION, len(self._tensors))]
        for name, arr in self._tensors.items():
            encoded = name.encode("utf-8")
            parts.append(struct.pack("<I", len(encoded)))
            parts.append(encoded)
            parts.append(struct.pack("<I", arr.ndim))
            parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            parts.append(arr.astype("<f4", copy=False).tobytes())
        body = b"".join(parts)
        return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "WeightArchive":
        if len(blob) < 16:
            raise WeightArchiveError("archive truncated")
        body, crc_bytes = blob[:-4], blob[-4:]
        (crc_stored,) = struct.unpack("<I", crc_bytes)
        if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
            raise WeightArchiveError("CRC mismatch: archive corrupted")
        if body[:4] != MAGIC:
            raise WeightArchiveError(f"bad magic {body[:4]!r}")
        version, count = struct.unpack_from("<II", body, 4)
        if version != VERSION:
            raise WeightArchiveError(f"unsupported format version {version}")
        off = 12
        archive = cls()
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", body, off)
            off += 4
            name = body[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", body, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", body, off)
            off += 4 * rank
            size = 4 * int(np.prod(dims, dtype=np.int64)) if rank else 4
            payload = body[off:off + size]
            if len(payload) != size:
                raise WeightArchiveError(f"tensor {name!r} payload truncated")
            off += size
            archive.add(name, np.frombuffer(payload, dtype="<f4").reshape(dims))
        if off != len(body):
            raise WeightArchiveError("trailing bytes after last tensor")
        return archive

    @classmethod
    def load(cls, path) -> "WeightArchive":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())
