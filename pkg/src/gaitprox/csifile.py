"""Reader/writer for the text CSI and power formats.

Header line, then one CSV row per frame::

    csi,v1,<num_subcarriers>,<sample_rate_hz>,<center_freq_hz>,<bandwidth_hz>
    timestamp,re_0,im_0,...,re_{N-1},im_{N-1}

    power,v1,<num_subcarriers>,<sample_rate_hz>,<center_freq_hz>,<bandwidth_hz>
    timestamp,g_0,...,g_{N-1}
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator, TextIO

import numpy as np

FORMAT_VERSION = "v1"


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Header:
    kind: str  # "csi" or "power"
    num_subcarriers: int
    sample_rate: float
    center_freq: float
    bandwidth: float

    def format(self) -> str:
        return (f"{self.kind},{FORMAT_VERSION},{self.num_subcarriers},"
                f"{self.sample_rate:.17g},{self.center_freq:.17g},{self.bandwidth:.17g}")

    @property
    def row_width(self) -> int:
        per = 2 if self.kind == "csi" else 1
        return 1 + per * self.num_subcarriers

    def subcarrier_freqs(self) -> np.ndarray:
        n = self.num_subcarriers
        spacing = self.bandwidth / n
        return self.center_freq + (np.arange(n) - (n - 1) / 2) * spacing

    @classmethod
    def parse(cls, line: str) -> "Header":
        parts = line.strip().split(",")
        if len(parts) != 6:
            raise ParseError(f"header needs 6 fields, got {len(parts)}", 1)
        kind, version = parts[0], parts[1]
        if kind not in ("csi", "power"):
            raise ParseError(f"unknown stream kind {kind!r}", 1)
        if version != FORMAT_VERSION:
            raise ParseError(f"unsupported version {version!r}", 1)
        try:
            n = int(parts[2])
            fs, fc, bw = (float(p) for p in parts[3:])
        except ValueError as exc:
            raise ParseError(f"bad header value ({exc})", 1) from None
        if n < 1 or not (fs > 0 and fc > 0 and bw > 0):
            raise ParseError("header values must be positive", 1)
        return cls(kind, n, fs, fc, bw)


def _row_fmt(width: int) -> str:
    return "%.9f" + ",%.9g" * (width - 1) + "\n"


def write_header(fh: TextIO, header: Header) -> None:
    fh.write(header.format() + "\n")


def write_csi_rows(fh: TextIO, timestamps: np.ndarray, csi: np.ndarray) -> None:
    block = np.empty((csi.shape[0], 1 + 2 * csi.shape[1]))
    block[:, 0] = timestamps
    block[:, 1::2] = csi.real
    block[:, 2::2] = csi.imag
    _write_block(fh, block)


def write_power_rows(fh: TextIO, timestamps: np.ndarray, g: np.ndarray) -> None:
    block = np.column_stack([timestamps, g])
    _write_block(fh, block)


def _write_block(fh: TextIO, block: np.ndarray) -> None:
    fmt = _row_fmt(block.shape[1])
    fh.write("".join(fmt % tuple(row) for row in block.tolist()))


def read_header(fh: TextIO) -> Header:
    first = fh.readline()
    if not first:
        raise ParseError("empty file", 1)
    return Header.parse(first)


def iter_rows(fh: TextIO, header: Header, chunk_rows: int = 3000
              ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(timestamps, values)`` blocks; values are complex CSI for
    ``csi`` streams and power for ``power`` streams.

    Malformed rows raise ``ParseError`` carrying the 1-based file line.
    """
    width = header.row_width
    buf: list[str] = []
    numbers: list[int] = []
    for line_no, raw in enumerate(fh, start=2):
        if not raw.strip():
            continue
        buf.append(raw)
        numbers.append(line_no)
        if len(buf) >= chunk_rows:
            yield _parse_block(buf, numbers, width, header)
            buf, numbers = [], []
    if buf:
        yield _parse_block(buf, numbers, width, header)


def _parse_block(lines, numbers, width, header):
    try:
        arr = np.loadtxt(io.StringIO("".join(lines)), delimiter=",", ndmin=2)
        ok = arr.shape[1] == width and np.all(np.isfinite(arr))
    except ValueError:
        ok = False
    if not ok:
        _diagnose(lines, numbers, width)
    ts = arr[:, 0]
    if header.kind == "csi":
        vals = arr[:, 1::2] + 1j * arr[:, 2::2]
    else:
        vals = arr[:, 1:]
    return ts, vals


def _diagnose(lines, numbers, width):
    # line-numbered diagnostic for the first bad row in a block
    for line, raw in zip(numbers, lines):
        fields = raw.strip().split(",")
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, found {len(fields)}", line)
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", line) from None
        if not all(np.isfinite(vals)):
            raise ParseError("non-finite value", line)
    raise ParseError("unparseable block", numbers[0])
