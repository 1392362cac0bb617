"""Little-endian framing shared by every blob format: magic, version, CRC32."""

from __future__ import annotations

import struct
import zlib

from sandwichbf.errors import BadMagic, ChecksumMismatch, TrailingBytes, Truncated, UnknownVersion


class Writer:
    def __init__(self, magic: bytes, version: int) -> None:
        self._parts = [magic, struct.pack("<B", version)]

    def u8(self, v: int) -> None:
        self._parts.append(struct.pack("<B", v))

    def u16(self, v: int) -> None:
        self._parts.append(struct.pack("<H", v))

    def u32(self, v: int) -> None:
        self._parts.append(struct.pack("<I", v))

    def u64(self, v: int) -> None:
        self._parts.append(struct.pack("<Q", v))

    def f64(self, v: float) -> None:
        self._parts.append(struct.pack("<d", v))

    def raw(self, data: bytes) -> None:
        self._parts.append(bytes(data))

    def blob(self, data: bytes) -> None:
        self.u64(len(data))
        self.raw(data)

    def finish(self) -> bytes:
        body = b"".join(self._parts)
        return body + struct.pack("<I", zlib.crc32(body))


class Reader:
    """Cursor over a framed blob; checks magic and version on construction."""

    def __init__(self, data: bytes, magic: bytes, versions: tuple[int, ...] = (1,)) -> None:
        data = bytes(data)
        if len(data) < len(magic):
            raise Truncated(f"{len(data)} bytes is shorter than the header")
        if data[: len(magic)] != magic:
            raise BadMagic(f"expected magic {magic!r}, got {data[:len(magic)]!r}")
        self._data = data
        self._pos = len(magic)
        self.version = self.u8()
        if self.version not in versions:
            raise UnknownVersion(f"unsupported {magic.decode()} version {self.version}")

    def _take(self, size: int) -> bytes:
        end = self._pos + size
        if size < 0 or end > len(self._data):
            raise Truncated(f"needed {size} bytes at offset {self._pos}, blob has {len(self._data)}")
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def raw(self, size: int) -> bytes:
        return self._take(size)

    def blob(self) -> bytes:
        return self._take(self.u64())

    def finish(self) -> None:
        body_end = self._pos
        (crc,) = struct.unpack("<I", self._take(4))
        if crc != zlib.crc32(self._data[:body_end]):
            raise ChecksumMismatch("CRC32 does not match payload")
        if self._pos != len(self._data):
            raise TrailingBytes(f"{len(self._data) - self._pos} unexpected bytes after checksum")
