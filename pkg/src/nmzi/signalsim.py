"""
Vibrating-mirror detector signal and its amplitude spectrum.

Each mirror k is driven as phi_k(t) = (amp_phase + i amp_deflect) sin(2 pi f_k t).
An intensity-sum detector sees the exact detector power with the deflection
part removed. A position-differential detector sees only the first-order
imaginary-channel term: it is blind to the fringe signal and to the DC
level.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .optics import (
    MIRRORS,
    NmziConfig,
    first_order_coefficients,
    path_amplitudes,
)

__all__ = [
    "MirrorVibration",
    "VibrationSpec",
    "DetectorModel",
    "Window",
    "SimParams",
    "Spectrum",
    "AmplitudeTooLarge",
    "UnresolvableFrequencies",
    "FrequencyOutOfRange",
    "ZeroReferencePeak",
    "DEFAULT_FREQUENCIES",
    "MAX_VIBRATION",
    "synthesize_timeseries",
    "power_spectrum",
    "peak_amplitudes",
    "mirror_peaks",
    "suppression_db",
    "suppression_from_peaks",
]

DEFAULT_FREQUENCIES = {"A": 1100.0, "B": 1200.0, "C": 1300.0, "E": 1400.0, "F": 1500.0}
MAX_VIBRATION = 0.01
SUPPRESSION_CAP_DB = 200.0
# reference peaks at or below this are treated as absent
ZERO_PEAK = 1e-14


class AmplitudeTooLarge(ValueError):
    pass


class UnresolvableFrequencies(ValueError):
    pass


class FrequencyOutOfRange(ValueError):
    pass


class ZeroReferencePeak(ValueError):
    pass


class DetectorModel(enum.Enum):
    INTENSITY_SUM = "intensity_sum"
    POSITION_DIFFERENTIAL = "position_differential"


class Window(enum.Enum):
    RECTANGULAR = "rect"
    HANN = "hann"


@dataclass(frozen=True)
class MirrorVibration:
    freq: float
    amp_phase: float = 0.0
    amp_deflect: float = 0.0


@dataclass(frozen=True)
class VibrationSpec:
    mirrors: Mapping[str, MirrorVibration] = field(default_factory=dict)

    def __post_init__(self):
        missing = set(MIRRORS) - set(self.mirrors)
        if missing:
            raise ValueError(f"missing mirrors: {sorted(missing)}")
        for m, v in self.mirrors.items():
            if not v.freq > 0:
                raise ValueError(f"mirror {m}: frequency must be positive")
            if abs(v.amp_phase) > MAX_VIBRATION or abs(v.amp_deflect) > MAX_VIBRATION:
                raise AmplitudeTooLarge(
                    f"mirror {m}: vibration amplitudes must not exceed {MAX_VIBRATION}"
                )

    def __getitem__(self, mirror: str) -> MirrorVibration:
        return self.mirrors[mirror]

    @classmethod
    def uniform(
        cls,
        amp_phase: float = 1e-3,
        amp_deflect: float = 1e-3,
        freqs: Mapping[str, float] = DEFAULT_FREQUENCIES,
    ) -> "VibrationSpec":
        return cls({m: MirrorVibration(freqs[m], amp_phase, amp_deflect) for m in MIRRORS})

    def scaled(self, s: float) -> "VibrationSpec":
        return VibrationSpec(
            {
                m: MirrorVibration(v.freq, s * v.amp_phase, s * v.amp_deflect)
                for m, v in self.mirrors.items()
            }
        )

    @property
    def frequencies(self) -> dict:
        return {m: self.mirrors[m].freq for m in MIRRORS}


@dataclass(frozen=True)
class SimParams:
    sample_rate: float = 50_000.0
    duration: float = 1.0
    window: Window = Window.HANN

    def __post_init__(self):
        if not (self.sample_rate > 0 and self.duration > 0):
            raise ValueError("sample rate and duration must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.duration))

    @property
    def resolution(self) -> float:
        return 1.0 / self.duration

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    amplitudes: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def _check_resolvable(vib: VibrationSpec, sim: SimParams) -> None:
    freqs = sorted(vib.frequencies.values())
    if sim.sample_rate < 10 * freqs[-1]:
        raise UnresolvableFrequencies(
            f"sample rate {sim.sample_rate:g} Hz is below 10x the top frequency {freqs[-1]:g} Hz"
        )
    spacing = min(b - a for a, b in zip(freqs, freqs[1:]))
    if spacing < 2 * sim.resolution or sim.duration * spacing < 10:
        raise UnresolvableFrequencies(
            f"mirror frequencies {spacing:g} Hz apart are not resolvable in {sim.duration:g} s"
        )


def synthesize_timeseries(
    config: NmziConfig,
    vib: VibrationSpec,
    det: DetectorModel,
    sim: SimParams,
    noise: float = 0.0,
    seed: int | None = 0,
) -> np.ndarray:
    """Detector signal sampled at sim.sample_rate for sim.duration."""
    _check_resolvable(vib, sim)
    t = sim.times()
    drive = {m: np.sin(2 * math.pi * vib[m].freq * t) for m in MIRRORS}

    if det is DetectorModel.INTENSITY_SUM:
        a, b, c = path_amplitudes(config)
        s = config.convention.c_sign
        phase = {m: vib[m].amp_phase * drive[m] for m in MIRRORS}
        inner = phase["E"] + phase["F"]
        field_ = (
            a * np.exp(1j * (config.chi + phase["A"]))
            + b * np.exp(1j * (inner + phase["B"]))
            + s * c * np.exp(1j * (inner + phase["C"] + config.phi))
        )
        samples = np.abs(field_) ** 2
    else:
        coeffs = first_order_coefficients(config)
        samples = np.zeros_like(t)
        for m in MIRRORS:
            samples += coeffs.d_im[m] * vib[m].amp_deflect * drive[m]

    if noise:
        samples = samples + np.random.default_rng(seed).normal(0.0, noise, t.shape)
    return samples


def power_spectrum(samples: Sequence[float], sim: SimParams) -> Spectrum:
    """Single-sided amplitude spectrum.

    The DC bin is the sample mean. The remaining bins come from the
    mean-removed, windowed signal scaled by 2/sum(window), so a sinusoid of
    amplitude s centred on a bin reads s for either window; the window's
    own DC leakage never reaches bin 1.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    if sim.window is Window.HANN:
        w = np.hanning(n + 1)[:-1]  # periodic Hann
    else:
        w = np.ones(n)
    mean = x.mean()
    spec = np.abs(np.fft.rfft((x - mean) * w)) * (2.0 / w.sum())
    if n % 2 == 0:
        spec[-1] /= 2.0
    spec[0] = abs(mean)
    freqs = np.fft.rfftfreq(n, d=1.0 / sim.sample_rate)
    return Spectrum(freqs, spec)


def peak_amplitudes(spec: Spectrum, freqs: Sequence[float]) -> list[float]:
    """Amplitude at each frequency.

    On a bin centre the bin's own value is returned; between bins the larger
    of the two neighbouring bins.
    """
    df = spec.spacing
    top = spec.freqs[-1]
    out = []
    for f in freqs:
        if not 0.0 <= f <= top:
            raise FrequencyOutOfRange(f"{f:g} Hz is outside [0, {top:g}] Hz")
        pos = f / df
        k = int(round(pos))
        if abs(pos - k) <= 1e-9:
            out.append(float(spec.amplitudes[k]))
        else:
            lo = int(math.floor(pos))
            out.append(float(spec.amplitudes[lo : lo + 2].max()))
    return out


def mirror_peaks(
    config: NmziConfig, vib: VibrationSpec, det: DetectorModel, sim: SimParams
) -> dict:
    spec = power_spectrum(synthesize_timeseries(config, vib, det, sim), sim)
    values = peak_amplitudes(spec, [vib[m].freq for m in MIRRORS])
    return dict(zip(MIRRORS, values))


def suppression_db(
    test: NmziConfig,
    reference: NmziConfig,
    mirror: str,
    vib: VibrationSpec,
    det: DetectorModel,
    sim: SimParams,
) -> float:
    """20 log10(reference peak / test peak) at the mirror's frequency."""
    if test.ratios != reference.ratios:
        raise ValueError("test and reference must share splitting ratios")
    ref = mirror_peaks(reference, vib, det, sim)[mirror]
    if ref <= ZERO_PEAK:
        raise ZeroReferencePeak(f"reference shows no trace of mirror {mirror}")
    return suppression_from_peaks(ref, mirror_peaks(test, vib, det, sim)[mirror])


def suppression_from_peaks(reference: float, peak: float) -> float:
    if peak <= reference * 10 ** (-SUPPRESSION_CAP_DB / 20):
        return SUPPRESSION_CAP_DB
    return 20.0 * math.log10(reference / peak)
