"""Butterworth band extraction filters.

Digital filters are designed from the analog Butterworth prototype via the
bilinear transform with frequency pre-warping of both band edges, so the
stated edges land exactly on the -3 dB points. The result is realized as a
cascade of second-order sections, which stays well conditioned even for the
breathing band (0.1 Hz at an 80 Hz rate is 0.00125 of Nyquist, where a single
high-order polynomial would be numerically useless).

A zero low edge degrades the design to an order-N low-pass: a bandpass whose
lower edge is 0 Hz *is* a low-pass (used for the apnea band).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidBand


@dataclass(frozen=True)
class FilterSpec:
    """Band edges in Hz, analog prototype order, and the sampling rate."""

    low_cut_hz: float
    high_cut_hz: float
    order: int
    sample_rate_hz: float

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise InvalidBand("sample_rate_hz must be positive")
        if self.low_cut_hz < 0:
            raise InvalidBand("low_cut_hz must be >= 0")
        if not self.low_cut_hz < self.high_cut_hz:
            raise InvalidBand(
                f"low_cut_hz {self.low_cut_hz} must be below high_cut_hz {self.high_cut_hz}")
        if not self.high_cut_hz < self.sample_rate_hz / 2:
            raise InvalidBand(
                f"high_cut_hz {self.high_cut_hz} must be below Nyquist "
                f"{self.sample_rate_hz / 2}")
        if not 1 <= int(self.order) <= 8:
            raise InvalidBand("order must be in [1, 8]")

    @property
    def is_lowpass(self) -> bool:
        return self.low_cut_hz == 0.0


@dataclass(frozen=True)
class BiquadSection:
    """One direct-form II transposed section with monic denominator."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def is_stable(self) -> bool:
        return abs(self.a2) < 1.0 and abs(self.a1) < 1.0 + self.a2


@dataclass(frozen=True)
class BiquadCascade:
    sections: tuple
    overall_gain: float

    def __post_init__(self):
        for sec in self.sections:
            if not sec.is_stable():
                raise InvalidBand(f"unstable section {sec}")

    def poles(self) -> np.ndarray:
        out = []
        for sec in self.sections:
            out.extend(np.roots([1.0, sec.a1, sec.a2]))
        return np.asarray(out)


def _prototype_poles(order: int):
    """Left-half-plane poles of the unit-cutoff analog Butterworth filter."""
    return [cmath.exp(1j * math.pi * (2 * k + order - 1) / (2 * order))
            for k in range(1, order + 1)]


def _bilinear_pole(p: complex, fs2: float) -> complex:
    return (fs2 + p) / (fs2 - p)


def _biquad_from_pole_pair(q1: complex, q2: complex, b: Sequence[float]) -> BiquadSection:
    # (z - q1)(z - q2) with real product: a1 = -(q1+q2), a2 = q1*q2
    a1 = -(q1 + q2)
    a2 = q1 * q2
    return BiquadSection(b[0], b[1], b[2], float(a1.real), float(a2.real))


def design_bandpass(spec: FilterSpec) -> BiquadCascade:
    """Design the Butterworth filter for ``spec`` as a biquad cascade.

    Bandpass specs yield order-N bandpass filters (2N poles, N sections);
    specs with a zero low edge yield order-N low-passes (ceil(N/2) sections).
    """
    fs = float(spec.sample_rate_hz)
    order = int(spec.order)
    fs2 = 2.0 * fs

    def warp(f_hz: float) -> float:
        return fs2 * math.tan(math.pi * f_hz / fs)

    proto = _prototype_poles(order)

    if spec.is_lowpass:
        wc = warp(spec.high_cut_hz)
        analog_poles = [p * wc for p in proto]
        gain_a = wc ** order
        # no finite analog zeros; all digital zeros sit at z = -1
        digital = [_bilinear_pole(p, fs2) for p in analog_poles]
        gain_num = 1.0
        gain_den = np.prod([fs2 - p for p in analog_poles])
        gain = gain_a * (gain_num / gain_den).real

        sections = []
        complex_poles = [p for p in digital if p.imag > 1e-14]
        real_poles = [p.real for p in digital if abs(p.imag) <= 1e-14]
        for p in complex_poles:
            sections.append(_biquad_from_pole_pair(p, p.conjugate(), (1.0, 2.0, 1.0)))
        real_poles.sort()
        while len(real_poles) >= 2:
            r1, r2 = real_poles.pop(), real_poles.pop()
            sections.append(_biquad_from_pole_pair(complex(r1), complex(r2), (1.0, 2.0, 1.0)))
        if real_poles:
            r = real_poles.pop()
            sections.append(BiquadSection(1.0, 1.0, 0.0, -r, 0.0))
        return BiquadCascade(tuple(sections), float(gain))

    w1 = warp(spec.low_cut_hz)
    w2 = warp(spec.high_cut_hz)
    w0sq = w1 * w2
    bw = w2 - w1

    # low-pass prototype -> bandpass: s -> (s^2 + w0^2) / (bw * s)
    analog_poles = []
    pole_pairs = []  # analog pole groups producing one real biquad each
    for p in proto:
        if abs(p.imag) <= 1e-14:
            ps = p.real * bw / 2.0
            q1 = ps + cmath.sqrt(complex(ps * ps - w0sq))
            q2 = ps - cmath.sqrt(complex(ps * ps - w0sq))
            analog_poles.extend([q1, q2])
            if abs(q1.imag) <= 1e-14:
                pole_pairs.append((q1, q2))  # two real poles
            else:
                pole_pairs.append((q1, q1.conjugate()))  # conjugate pair
        elif p.imag > 0:
            ps = p * bw / 2.0
            q1 = ps + cmath.sqrt(ps * ps - w0sq)
            q2 = ps - cmath.sqrt(ps * ps - w0sq)
            analog_poles.extend([q1, q2, q1.conjugate(), q2.conjugate()])
            pole_pairs.append((q1, q1.conjugate()))
            pole_pairs.append((q2, q2.conjugate()))
    gain_a = bw ** order
    # N analog zeros at s = 0
    gain = gain_a * ((fs2 ** order) / np.prod([fs2 - p for p in analog_poles])).real

    sections = []
    for q1, q2 in pole_pairs:
        z1 = _bilinear_pole(q1, fs2)
        z2 = _bilinear_pole(q2, fs2)
        # one zero at z=1 and one at z=-1 per section: b = (1, 0, -1)
        sections.append(_biquad_from_pole_pair(z1, z2, (1.0, 0.0, -1.0)))
    sections.sort(key=lambda s: s.a2)
    return BiquadCascade(tuple(sections), float(gain))


def frequency_response(cascade: BiquadCascade, freqs_hz, sample_rate_hz: float) -> np.ndarray:
    """Complex response H(e^{j 2 pi f / fs}) evaluated from the coefficients."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    zinv = np.exp(-2j * np.pi * f / sample_rate_hz)
    h = np.full(f.shape, cascade.overall_gain, dtype=np.complex128)
    for sec in cascade.sections:
        num = sec.b0 + sec.b1 * zinv + sec.b2 * zinv * zinv
        den = 1.0 + sec.a1 * zinv + sec.a2 * zinv * zinv
        h *= num / den
    return h


class FilterState:
    """Per-channel direct-form II transposed state for one cascade.

    One instance filters one multichannel signal incrementally; feeding the
    same samples in one block or packet by packet produces bit-identical
    output, which is what lets streaming inference match batch processing.
    """

    def __init__(self, cascade: BiquadCascade, n_channels: int):
        self.cascade = cascade
        self.s1 = np.zeros((len(cascade.sections), n_channels))
        self.s2 = np.zeros((len(cascade.sections), n_channels))

    def process(self, block: np.ndarray) -> np.ndarray:
        """Filter a (T, S) block (or a single (S,) packet), advancing state."""
        single = block.ndim == 1
        x = np.atleast_2d(np.asarray(block, dtype=np.float64))
        y = x.copy()
        for i, sec in enumerate(self.cascade.sections):
            s1 = self.s1[i]
            s2 = self.s2[i]
            for t in range(y.shape[0]):
                xt = y[t]
                out = sec.b0 * xt + s1
                s1[:] = sec.b1 * xt - sec.a1 * out + s2
                s2[:] = sec.b2 * xt - sec.a2 * out
                y[t] = out
        y *= self.cascade.overall_gain
        return y[0] if single else y


def filter_values(cascade: BiquadCascade, values: np.ndarray) -> np.ndarray:
    """Causal single pass over a (T, S) matrix with zero initial conditions."""
    state = FilterState(cascade, values.shape[1])
    return state.process(values)


def filter_values_zero_phase(cascade: BiquadCascade, values: np.ndarray) -> np.ndarray:
    """Forward-backward pass (offline comparison mode; squares the magnitude
    response and cancels phase). No edge padding is applied."""
    fwd = filter_values(cascade, values)
    back = filter_values(cascade, fwd[::-1])
    return back[::-1].copy()
