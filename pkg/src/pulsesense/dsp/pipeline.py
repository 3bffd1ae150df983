"""The five-stage processing chain: amplitude, DC removal, band extraction,
shaping, segmentation/normalization.

Stage order is fixed: amplitude -> remove_dc -> bandpass -> savgol ->
segment -> standardize. All stages are pure; identical inputs give
bit-identical segment matrices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigInvalidValue, EmptyStream, WindowLongerThanSeries
from ..ingest import AlignedRecording, CsiStream
from .filters import (
    BiquadCascade,
    FilterSpec,
    design_bandpass,
    filter_values,
    filter_values_zero_phase,
)
from .savgol import SavGolKernel, savgol_kernel, smooth_values

MODE_BANDS = {
    "heart": (0.8, 2.17),
    "breath": (0.1, 0.5),
    "apnea": (0.0, 0.5),  # zero low edge: low-pass over the breathing band
}

BANDPASS_ORDER = 3

SEGMENT_DUMP_MAGIC = b"PSSEG1"


@dataclass
class AmplitudeSeries:
    """Time x subcarrier real matrix at a known sampling rate."""

    values: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("values must be a non-empty (T, S) matrix")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")


@dataclass(frozen=True)
class WindowSegment:
    """One standardized window plus its ground-truth label."""

    values: np.ndarray
    label: float
    start_index: int
    duration_s: float


def amplitude(stream: CsiStream) -> AmplitudeSeries:
    """|CSI| per packet and subcarrier: sqrt(re^2 + im^2)."""
    if stream.frame_count == 0:
        raise EmptyStream("cannot take amplitude of an empty stream")
    values = np.hypot(stream.values.real, stream.values.imag)
    return AmplitudeSeries(values, stream.sample_rate_hz)


def sequential_column_mean(values: np.ndarray) -> np.ndarray:
    """Per-subcarrier mean via strict packet-order accumulation.

    Defined this way (rather than np.mean) so a streaming consumer that sees
    one packet at a time computes the bit-identical mean.
    """
    acc = np.zeros(values.shape[1], dtype=np.float64)
    for row in values:
        acc += row
    return acc / values.shape[0]


def remove_dc(series: AmplitudeSeries) -> AmplitudeSeries:
    """Subtract each subcarrier's mean over all T samples."""
    mu = sequential_column_mean(series.values)
    return AmplitudeSeries(series.values - mu, series.sample_rate_hz)


def band_for_mode(mode: str) -> Tuple[float, float]:
    try:
        return MODE_BANDS[mode]
    except KeyError:
        raise ConfigInvalidValue(
            f"mode must be one of {sorted(MODE_BANDS)}, got {mode!r}") from None


def apply_filter(cascade: BiquadCascade, series: AmplitudeSeries) -> AmplitudeSeries:
    """Causal single-pass filtering of every subcarrier independently."""
    return AmplitudeSeries(filter_values(cascade, series.values), series.sample_rate_hz)


def savgol_smooth(kernel: SavGolKernel, series: AmplitudeSeries) -> AmplitudeSeries:
    """Smooth each subcarrier; boundaries mirror-padded, shape preserved."""
    return AmplitudeSeries(smooth_values(kernel, series.values), series.sample_rate_hz)


def window_length(window_s: float, sample_rate_hz: float) -> int:
    return int(round(window_s * sample_rate_hz))


def segment(series: AmplitudeSeries, window_s: float,
            stride_packets: int = 1) -> List[np.ndarray]:
    """Overlapping raw windows starting at 0, stride, 2*stride, ..."""
    t_len = series.values.shape[0]
    w = window_length(window_s, series.sample_rate_hz)
    if w < 1:
        raise WindowLongerThanSeries(f"window of {window_s}s is empty at this rate")
    if w > t_len:
        raise WindowLongerThanSeries(
            f"window of {w} packets exceeds series length {t_len}")
    if stride_packets < 1:
        raise ConfigInvalidValue("stride must be a positive packet count")
    count = (t_len - w) // stride_packets + 1
    return [series.values[i * stride_packets:i * stride_packets + w] for i in range(count)]


def standardize(window: np.ndarray) -> np.ndarray:
    """Column z-score with the window's own mean and population std.

    Columns whose std is below 1e-12 come out identically zero.
    """
    window = np.asarray(window, dtype=np.float64)
    mu = window.mean(axis=0)
    sigma = window.std(axis=0)
    out = window - mu
    degenerate = sigma < 1e-12
    sigma_safe = np.where(degenerate, 1.0, sigma)
    out /= sigma_safe
    if degenerate.any():
        out[:, degenerate] = 0.0
    return out


def window_label(aligned: np.ndarray, start: int, w: int, mode: str) -> float:
    """Rate labels average over the window; apnea uses the 50% majority rule."""
    chunk = aligned[start:start + w]
    if mode == "apnea":
        return 1.0 if float(np.mean(chunk)) >= 0.5 else 0.0
    return float(np.mean(chunk))


@dataclass
class PipelineConfig:
    """Validated pipeline block of the run configuration."""

    mode: str = "heart"
    window_s: float = 5.0
    stride: int = 1
    band: Optional[Tuple[float, float]] = None
    savgol_window: int = 15
    savgol_order: int = 3
    zero_phase: bool = False
    subcarriers: Optional[Sequence[int]] = None

    _ALLOWED = ("mode", "window_s", "stride", "band", "savgol", "zero_phase",
                "subcarriers")

    @classmethod
    def from_dict(cls, block: dict) -> "PipelineConfig":
        from ..config import reject_unknown  # local import avoids a cycle
        reject_unknown("pipeline", block, cls._ALLOWED)
        cfg = cls()
        cfg.mode = block.get("mode", cfg.mode)
        band_for_mode(cfg.mode)
        cfg.window_s = float(block.get("window_s", cfg.window_s))
        cfg.stride = int(block.get("stride", cfg.stride))
        if "band" in block:
            band = block["band"]
            reject_unknown("pipeline.band", band, ("low_hz", "high_hz"))
            cfg.band = (float(band["low_hz"]), float(band["high_hz"]))
        if "savgol" in block:
            sg = block["savgol"]
            reject_unknown("pipeline.savgol", sg, ("window", "order"))
            cfg.savgol_window = int(sg.get("window", cfg.savgol_window))
            cfg.savgol_order = int(sg.get("order", cfg.savgol_order))
        cfg.zero_phase = bool(block.get("zero_phase", cfg.zero_phase))
        if "subcarriers" in block and block["subcarriers"] is not None:
            cfg.subcarriers = [int(i) for i in block["subcarriers"]]
        return cfg

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "window_s": self.window_s,
            "stride": self.stride,
            "savgol": {"window": self.savgol_window, "order": self.savgol_order},
            "zero_phase": self.zero_phase,
        }
        if self.band is not None:
            out["band"] = {"low_hz": self.band[0], "high_hz": self.band[1]}
        if self.subcarriers is not None:
            out["subcarriers"] = list(self.subcarriers)
        return out

    def effective_band(self) -> Tuple[float, float]:
        return self.band if self.band is not None else band_for_mode(self.mode)


def run_pipeline(recording: AlignedRecording, mode: str, window_s: float,
                 stride: int = 1, *,
                 band: Optional[Tuple[float, float]] = None,
                 savgol_window: int = 15, savgol_order: int = 3,
                 zero_phase: bool = False,
                 subcarriers: Optional[Sequence[int]] = None) -> List[WindowSegment]:
    """Run all five stages over an aligned recording.

    ``band`` overrides the mode's default edges; everything else follows the
    fixed stage order.
    """
    stream = recording.stream
    aligned = recording.alignment
    series = amplitude(stream)
    if subcarriers is not None:
        series = AmplitudeSeries(series.values[:, list(subcarriers)],
                                 series.sample_rate_hz)
    series = remove_dc(series)
    low, high = band if band is not None else band_for_mode(mode)
    spec = FilterSpec(low, high, BANDPASS_ORDER, series.sample_rate_hz)
    cascade = design_bandpass(spec)
    if zero_phase:
        series = AmplitudeSeries(filter_values_zero_phase(cascade, series.values),
                                 series.sample_rate_hz)
    else:
        series = apply_filter(cascade, series)
    kernel = savgol_kernel(savgol_window, savgol_order)
    series = savgol_smooth(kernel, series)
    raw_windows = segment(series, window_s, stride)
    w = window_length(window_s, series.sample_rate_hz)
    segments = []
    for i, win in enumerate(raw_windows):
        start = i * stride
        segments.append(WindowSegment(
            values=standardize(win),
            label=window_label(aligned, start, w, mode),
            start_index=start,
            duration_s=w / series.sample_rate_hz,
        ))
    return segments


def run_pipeline_config(recording: AlignedRecording,
                        cfg: PipelineConfig) -> List[WindowSegment]:
    return run_pipeline(
        recording, cfg.mode, cfg.window_s, cfg.stride, band=cfg.band,
        savgol_window=cfg.savgol_window, savgol_order=cfg.savgol_order,
        zero_phase=cfg.zero_phase, subcarriers=cfg.subcarriers)


def write_segment_dump(segments: Sequence[WindowSegment]) -> bytes:
    """Binary dump: magic, u32 count/W/S, then float32 records (values+label)."""
    if not segments:
        raise EmptyStream("no segments to dump")
    w, s = segments[0].values.shape
    parts = [SEGMENT_DUMP_MAGIC, struct.pack("<III", len(segments), w, s)]
    for seg in segments:
        if seg.values.shape != (w, s):
            raise ValueError("segments disagree on shape")
        parts.append(np.asarray(seg.values, dtype="<f4").tobytes(order="C"))
        parts.append(struct.pack("<f", seg.label))
    return b"".join(parts)


def read_segment_dump(data: bytes) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of write_segment_dump: (count, W, S) values plus labels."""
    from ..errors import BadMagic, MalformedLine
    if data[:6] != SEGMENT_DUMP_MAGIC:
        raise BadMagic("not a segment dump")
    count, w, s = struct.unpack_from("<III", data, 6)
    rec_bytes = (w * s + 1) * 4
    expected = 6 + 12 + count * rec_bytes
    if len(data) != expected:
        raise MalformedLine(0, f"dump length {len(data)} != expected {expected}")
    values = np.empty((count, w, s), dtype=np.float64)
    labels = np.empty(count, dtype=np.float64)
    off = 18
    for i in range(count):
        arr = np.frombuffer(data, dtype="<f4", count=w * s, offset=off)
        values[i] = arr.reshape(w, s)
        off += w * s * 4
        labels[i] = struct.unpack_from("<f", data, off)[0]
        off += 4
    return values, labels
