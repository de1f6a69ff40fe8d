"""Canonical byte serialization.

Every hashed or signed structure is serialized as length-prefixed
big-endian fields in declared order: unsigned integers are 8 bytes,
variable-length byte strings carry a 4-byte length prefix, collections a
4-byte count prefix. This keeps digests bit-exact and replayable.
"""

from __future__ import annotations

import struct

from .errors import EncodingError

DIGEST_LEN = 32
ZERO_DIGEST = b"\x00" * DIGEST_LEN

Digest = bytes


class Writer:
    """Accumulates canonical bytes field by field."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def put_uint(self, value: int) -> "Writer":
        if value < 0:
            raise EncodingError(f"unsigned field got negative value {value}")
        self._parts.append(struct.pack(">Q", value))
        return self

    def put_bytes(self, value: bytes) -> "Writer":
        self._parts.append(struct.pack(">I", len(value)))
        self._parts.append(bytes(value))
        return self

    def put_str(self, value: str) -> "Writer":
        return self.put_bytes(value.encode("utf-8"))

    def put_bool(self, value: bool) -> "Writer":
        self._parts.append(b"\x01" if value else b"\x00")
        return self

    def put_count(self, n: int) -> "Writer":
        if n < 0:
            raise EncodingError("negative collection count")
        self._parts.append(struct.pack(">I", n))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    """Mirror of Writer; raises EncodingError on truncation or trailing bytes."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise EncodingError("truncated canonical data")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def take_uint(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def take_bytes(self) -> bytes:
        (n,) = struct.unpack(">I", self._take(4))
        return self._take(n)

    def take_str(self) -> str:
        try:
            return self.take_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError("invalid utf-8 in canonical data") from exc

    def take_bool(self) -> bool:
        byte = self._take(1)
        if byte not in (b"\x00", b"\x01"):
            raise EncodingError("invalid boolean byte")
        return byte == b"\x01"

    def take_count(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise EncodingError("trailing bytes after canonical data")
