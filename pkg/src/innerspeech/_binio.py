"""Little-endian binary IO helpers shared by the EIT1 / EIT-F / EIM1 containers."""

from __future__ import annotations

import struct

import numpy as np

from .errors import ValidationError


class Reader:
    """Cursor over a bytes buffer; every read raises on truncation."""

    def __init__(self, buf: bytes, label: str):
        self.buf = buf
        self.pos = 0
        self.label = label

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise ValidationError(f"{self.label}: truncated file (need {n} bytes at offset {self.pos})")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValidationError(f"{self.label}: invalid UTF-8 in string field") from exc

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        if count < 0 or count > (len(self.buf) - self.pos) // itemsize:
            raise ValidationError(
                f"{self.label}: truncated array (need {count} x {dtype} at offset {self.pos})"
            )
        arr = np.frombuffer(self.take(count * itemsize), dtype=np.dtype(dtype).newbyteorder("<"))
        return arr.astype(arr.dtype.newbyteorder("="))

    def expect_end(self) -> None:
        if self.pos != len(self.buf):
            raise ValidationError(f"{self.label}: {len(self.buf) - self.pos} trailing bytes")


class Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def raw(self, b: bytes) -> None:
        self.parts.append(b)

    def u8(self, v: int) -> None:
        self.parts.append(struct.pack("<B", v))

    def u32(self, v: int) -> None:
        self.parts.append(struct.pack("<I", v))

    def i64(self, v: int) -> None:
        self.parts.append(struct.pack("<q", v))

    def f64(self, v: float) -> None:
        self.parts.append(struct.pack("<d", v))

    def string(self, s: str) -> None:
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.parts.append(raw)

    def array(self, arr: np.ndarray, dtype: str) -> None:
        self.parts.append(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)
