"""Helpers for the lossless text snapshot formats.

Floats are written as C99 hex literals (float.hex) so that a save/load
round trip reproduces every value bit for bit.
"""

from __future__ import annotations

import math
from typing import IO, Iterator


def float_to_hex(value: float) -> str:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("cannot serialize a non-finite float")
    return value.hex()


def hex_to_float(token: str) -> float:
    try:
        value = float.fromhex(token)
    except ValueError:
        raise ValueError(f"malformed float token {token!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite float token {token!r}")
    return value


def parse_int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ValueError(f"malformed {what}: {token!r}") from None


class LineReader:
    """Iterates non-empty lines of a snapshot, tracking numbers for errors."""

    def __init__(self, handle: IO[str]):
        self._lines = self._scan(handle)
        self._pushed: list[tuple[int, str]] = []

    @staticmethod
    def _scan(handle: IO[str]) -> Iterator[tuple[int, str]]:
        for num, raw in enumerate(handle, start=1):
            line = raw.strip()
            if line:
                yield num, line

    def next(self, context: str) -> tuple[int, str]:
        if self._pushed:
            return self._pushed.pop()
        try:
            return next(self._lines)
        except StopIteration:
            raise ValueError(f"unexpected end of file while reading {context}") from None

    def next_or_none(self) -> tuple[int, str] | None:
        if self._pushed:
            return self._pushed.pop()
        try:
            return next(self._lines)
        except StopIteration:
            return None

    def push_back(self, item: tuple[int, str]) -> None:
        self._pushed.append(item)


def expect_header(reader: LineReader, magic: str) -> int:
    """Check the `<magic> <version>` first line; returns the version."""
    num, line = reader.next("header")
    parts = line.split()
    if len(parts) != 2 or parts[0] != magic:
        raise ValueError(f"line {num}: expected '{magic} <version>', got {line!r}")
    return parse_int(parts[1], "format version")


def read_field(reader: LineReader, name: str) -> str:
    """Read a `name value` line and return the value token."""
    num, line = reader.next(f"field {name}")
    parts = line.split(None, 1)
    if len(parts) != 2 or parts[0] != name:
        raise ValueError(f"line {num}: expected field {name!r}, got {line!r}")
    return parts[1]
