"""Parsing and alignment of CSI recordings and ground-truth label series.

Two on-disk formats are read:

* ESP32 CSV: one frame per line, ``timestamp,<2S ints>`` where the integers
  alternate imaginary,real per subcarrier (toolchain convention). An optional
  header line is detected by a non-numeric first field and skipped.
* Canonical JSONL: a header object followed by one frame object per line.
  This is the lossless interchange format written by the toolkit itself.

Label files are plain ``timestamp,value`` CSV.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Optional, Union

import numpy as np

from .errors import (
    InconsistentSubcarrierCount,
    InsufficientFrames,
    InsufficientOverlap,
    MalformedLine,
    NonMonotonicTimestamp,
    SchemaMismatch,
    ValueOutOfRange,
)

CANONICAL_SCHEMA = "pulse-sense/csi/v1"

LABEL_KINDS = ("heart_rate_bpm", "breathing_rate_brpm", "apnea_flag")

# Plausibility ranges enforced on parse; apnea labels must be exactly 0/1.
_LABEL_RANGES = {
    "heart_rate_bpm": (30.0, 220.0),
    "breathing_rate_brpm": (4.0, 40.0),
    "apnea_flag": (0.0, 1.0),
}

TextSource = Union[bytes, str, IO[bytes], IO[str]]


@dataclass(frozen=True)
class CsiFrame:
    """One timestamped CSI measurement across all subcarriers."""

    timestamp: float
    subcarriers: tuple  # complex values, one per subcarrier
    source_meta: Optional[str] = None


@dataclass
class CsiStream:
    """A CSI recording: per-packet complex channel values at a nominal rate.

    ``values`` has shape (T, S); ``timestamps`` is strictly increasing and
    expressed in seconds since recording start.
    """

    timestamps: np.ndarray
    values: np.ndarray
    sample_rate_hz: float
    source_meta: Optional[str] = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim != 2:
            raise ValueError("values must be a (T, S) matrix")
        if self.values.shape[0] != self.timestamps.shape[0]:
            raise ValueError("timestamps and values disagree on frame count")
        if self.values.shape[1] < 1:
            raise ValueError("subcarrier count must be positive")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.timestamps.size > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise NonMonotonicTimestamp("timestamps must be strictly increasing")

    @property
    def subcarrier_count(self) -> int:
        return self.values.shape[1]

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    def frames(self) -> Iterator[CsiFrame]:
        for t, row in zip(self.timestamps, self.values):
            yield CsiFrame(float(t), tuple(row), self.source_meta)

    def slice_time(self, start_s: float, end_s: float) -> "CsiStream":
        """Frames with start_s <= t < end_s."""
        mask = (self.timestamps >= start_s) & (self.timestamps < end_s)
        return CsiStream(self.timestamps[mask], self.values[mask],
                         self.sample_rate_hz, self.source_meta)


@dataclass
class LabelSeries:
    """Ground-truth samples of one kind, strictly increasing in time."""

    kind: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise ValueError(f"unknown label kind {self.kind!r}")
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.timestamps.shape != self.values.shape or self.timestamps.ndim != 1:
            raise ValueError("timestamps/values must be equal-length vectors")
        if self.timestamps.size > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise NonMonotonicTimestamp(f"{self.kind}: timestamps must be strictly increasing")
        lo, hi = _LABEL_RANGES[self.kind]
        bad = np.flatnonzero((self.values < lo) | (self.values > hi))
        if self.kind == "apnea_flag":
            bad = np.flatnonzero((self.values != 0.0) & (self.values != 1.0))
        if bad.size:
            t = self.timestamps[bad[0]]
            raise ValueOutOfRange(
                f"{self.kind}: value {self.values[bad[0]]} at t={t} outside allowed range")

    def __len__(self) -> int:
        return int(self.timestamps.size)


@dataclass
class AlignedRecording:
    """A stream plus a per-frame label value (nearest-label association)."""

    stream: CsiStream
    labels: LabelSeries
    alignment: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.alignment = np.asarray(self.alignment, dtype=np.float64)
        if self.alignment.shape[0] != self.stream.frame_count:
            raise ValueError("alignment length must equal frame count")


def _iter_text_lines(source: TextSource) -> Iterable[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        return io.StringIO(source)
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data)


def parse_esp32_csv(source: TextSource,
                    sample_rate_hz: Optional[float] = None) -> CsiStream:
    """Parse an ESP32-convention CSV capture into a CsiStream.

    Each data line is ``timestamp`` followed by 2S integers alternating
    imaginary,real per subcarrier. Unless ``sample_rate_hz`` is supplied, the
    rate is estimated as (N-1)/(t_last - t_first).
    """
    timestamps = []
    rows = []
    n_sub = None
    for line_no, raw in enumerate(_iter_text_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        # optional header: first field not numeric
        try:
            t = float(fields[0])
        except ValueError:
            if line_no == 1:
                continue
            raise MalformedLine(line_no, f"non-numeric timestamp {fields[0]!r}")
        payload = fields[1:]
        if not payload:
            raise MalformedLine(line_no, "no subcarrier values")
        if len(payload) % 2 != 0:
            raise InconsistentSubcarrierCount(
                line_no, f"odd value count {len(payload)} (expected 2 per subcarrier)")
        if n_sub is None:
            n_sub = len(payload) // 2
        elif len(payload) != 2 * n_sub:
            raise InconsistentSubcarrierCount(
                line_no, f"{len(payload) // 2} subcarriers, expected {n_sub}")
        try:
            ints = [float(v) for v in payload]
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from None
        if timestamps and t <= timestamps[-1]:
            raise NonMonotonicTimestamp(
                f"line {line_no}: timestamp {t} not after {timestamps[-1]}")
        timestamps.append(t)
        im = ints[0::2]
        re = ints[1::2]
        rows.append([complex(r, i) for r, i in zip(re, im)])
    if not rows:
        raise MalformedLine(0, "no data lines")
    ts = np.asarray(timestamps)
    if sample_rate_hz is None:
        if len(rows) < 2:
            raise InsufficientFrames(
                "cannot estimate sample rate from a single frame; pass sample_rate_hz")
        sample_rate_hz = (len(rows) - 1) / (ts[-1] - ts[0])
    return CsiStream(ts, np.asarray(rows, dtype=np.complex128), float(sample_rate_hz))


def parse_canonical(source: TextSource) -> CsiStream:
    """Parse the canonical JSONL format (lossless round trip)."""
    lines = _iter_text_lines(source)
    header_raw = None
    for raw in lines:
        if raw.strip():
            header_raw = raw
            break
    if header_raw is None:
        raise SchemaMismatch("empty input, expected header object")
    try:
        header = json.loads(header_raw)
    except json.JSONDecodeError as exc:
        raise MalformedLine(1, f"invalid header JSON: {exc}") from None
    if not isinstance(header, dict) or header.get("schema") != CANONICAL_SCHEMA:
        raise SchemaMismatch(f"expected schema {CANONICAL_SCHEMA!r}")
    try:
        fs = float(header["sample_rate_hz"])
        n_sub = int(header["subcarriers"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"bad header fields: {exc}") from None

    timestamps = []
    rows = []
    for line_no, raw in enumerate(lines, start=2):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            t = float(obj["t"])
            re = obj["re"]
            im = obj["im"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(line_no, str(exc)) from None
        if len(re) != n_sub or len(im) != n_sub:
            raise MalformedLine(
                line_no, f"got {len(re)}/{len(im)} values, header says {n_sub}")
        if timestamps and t <= timestamps[-1]:
            raise NonMonotonicTimestamp(
                f"line {line_no}: timestamp {t} not after {timestamps[-1]}")
        timestamps.append(t)
        rows.append([complex(r, i) for r, i in zip(re, im)])
    values = (np.asarray(rows, dtype=np.complex128)
              if rows else np.empty((0, n_sub), dtype=np.complex128))
    return CsiStream(np.asarray(timestamps), values, fs)


def write_canonical(stream: CsiStream) -> bytes:
    """Serialize to canonical JSONL. parse_canonical(write_canonical(x)) == x."""
    out = io.StringIO()
    header = {
        "schema": CANONICAL_SCHEMA,
        "sample_rate_hz": stream.sample_rate_hz,
        "subcarriers": stream.subcarrier_count,
    }
    out.write(json.dumps(header) + "\n")
    for t, row in zip(stream.timestamps, stream.values):
        rec = {
            "t": float(t),
            "re": [float(v) for v in row.real],
            "im": [float(v) for v in row.imag],
        }
        out.write(json.dumps(rec) + "\n")
    return out.getvalue().encode("utf-8")


def parse_labels(source: TextSource, kind: str) -> LabelSeries:
    """Parse a ``timestamp,value`` CSV into a validated LabelSeries."""
    timestamps = []
    values = []
    for line_no, raw in enumerate(_iter_text_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise MalformedLine(line_no, f"expected 2 fields, got {len(fields)}")
        try:
            t = float(fields[0])
        except ValueError:
            if line_no == 1:
                continue
            raise MalformedLine(line_no, f"non-numeric timestamp {fields[0]!r}")
        try:
            v = float(fields[1])
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from None
        timestamps.append(t)
        values.append(v)
    return LabelSeries(kind, np.asarray(timestamps), np.asarray(values))


def align(stream: CsiStream, labels: LabelSeries) -> AlignedRecording:
    """Assign each frame the nearest label value (ties go to the earlier label).

    The label span must overlap at least half of the stream span; frames
    outside the label span take the nearest endpoint value.
    """
    if stream.frame_count == 0:
        raise InsufficientOverlap("stream has no frames")
    if len(labels) == 0:
        raise InsufficientOverlap("label series is empty")
    t0, t1 = float(stream.timestamps[0]), float(stream.timestamps[-1])
    l0, l1 = float(labels.timestamps[0]), float(labels.timestamps[-1])
    span = t1 - t0
    overlap = min(t1, l1) - max(t0, l0)
    if span <= 0:
        ok = l0 <= t0 <= l1
    else:
        ok = overlap / span >= 0.5
    if not ok:
        raise InsufficientOverlap(
            f"label span [{l0}, {l1}] covers too little of stream span [{t0}, {t1}]")

    lt = labels.timestamps
    # index of the first label strictly after each frame time
    right = np.searchsorted(lt, stream.timestamps, side="right")
    left = np.clip(right - 1, 0, len(lt) - 1)
    right = np.clip(right, 0, len(lt) - 1)
    d_left = np.abs(stream.timestamps - lt[left])
    d_right = np.abs(lt[right] - stream.timestamps)
    # tie -> earlier label
    pick = np.where(d_right < d_left, right, left)
    alignment = labels.values[pick]
    return AlignedRecording(stream, labels, alignment)
