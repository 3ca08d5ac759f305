"""
Field propagation through the nested Mach-Zehnder interferometer.

The network: BS1 splits the input into the outer upper arm U (mirror A,
outer phase chi) and the lower arm L (mirror E). L feeds the inner MZI:
BS2 splits it into u (mirror B) and l (mirror C, inner phase phi), BS3
recombines them into the dark port out1 and the arm L' (mirror F). BS4
recombines U and L' into the main detector D and the second port out2.

Every beam splitter is the symmetric lossless splitter

    [out_a]   [i r   t ] [in_a]
    [out_b] = [ t   i r] [in_b]

and a mirror with complex phase p multiplies its arm by exp(i p). A
positive imaginary part is therefore a loss.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

__all__ = [
    "MIRRORS",
    "LINEAR_REGIME",
    "SignConvention",
    "SplitRatio",
    "Ratios",
    "NmziConfig",
    "MirrorPerturbation",
    "PathAmplitudes",
    "OutputState",
    "WeakTraceVector",
    "PerturbationTooLarge",
    "InvalidStep",
    "path_amplitudes",
    "propagate",
    "detector_field",
    "detector_power_exact",
    "detector_power_linearized",
    "first_order_coefficients",
    "finite_difference_gradient",
    "equal_intensity_ratios",
]

MIRRORS = ("A", "B", "C", "E", "F")

# max |phi_k| accepted by the linearized evaluator
LINEAR_REGIME = 0.1


class PerturbationTooLarge(ValueError):
    """A linearized evaluation was asked for outside the small-phase regime."""


class InvalidStep(ValueError):
    """Finite-difference step outside (0, 1e-3]."""


class SignConvention(enum.Enum):
    """Relative sign of the lower inner path (c-path) at the detector.

    AS_WRITTEN gives ``a e^{i chi} + b - c e^{i phi}``; EXPERIMENT_MATCHED
    flips the c-path, ``a e^{i chi} + b + c e^{i phi}``, which is the same
    device with the inner phase offset by pi.
    """

    AS_WRITTEN = "as_written"
    EXPERIMENT_MATCHED = "experiment_matched"

    @property
    def c_sign(self) -> int:
        return -1 if self is SignConvention.AS_WRITTEN else 1

    def inner_phase(self, phi: float) -> float:
        """Physical phase carried by the lower inner arm."""
        return phi if self is SignConvention.AS_WRITTEN else phi + math.pi


@dataclass(frozen=True)
class SplitRatio:
    """Amplitude transmissivity of a beam splitter; r follows from t."""

    t: float

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0):
            raise ValueError(f"transmissivity must lie in [0, 1], got {self.t!r}")

    @property
    def r(self) -> float:
        return math.sqrt(1.0 - self.t * self.t)

    @classmethod
    def from_r(cls, r: float) -> "SplitRatio":
        if not (0.0 <= r <= 1.0):
            raise ValueError(f"reflectivity must lie in [0, 1], got {r!r}")
        return cls(math.sqrt(1.0 - r * r))


class Ratios(NamedTuple):
    bs1: SplitRatio
    bs2: SplitRatio
    bs3: SplitRatio
    bs4: SplitRatio

    @classmethod
    def from_t(cls, t1: float, t2: float, t3: float, t4: float) -> "Ratios":
        return cls(SplitRatio(t1), SplitRatio(t2), SplitRatio(t3), SplitRatio(t4))

    def configure(
        self,
        phi: float,
        chi: float,
        convention: SignConvention = SignConvention.EXPERIMENT_MATCHED,
    ) -> "NmziConfig":
        return NmziConfig(*self, phi=phi, chi=chi, convention=convention)


def equal_intensity_ratios() -> Ratios:
    """Equal-intensity setting: r1 = r4 = sqrt(2/3), r2 = r3 = sqrt(1/2)."""
    return Ratios(
        SplitRatio.from_r(math.sqrt(2 / 3)),
        SplitRatio.from_r(math.sqrt(1 / 2)),
        SplitRatio.from_r(math.sqrt(1 / 2)),
        SplitRatio.from_r(math.sqrt(2 / 3)),
    )


@dataclass(frozen=True)
class NmziConfig:
    bs1: SplitRatio
    bs2: SplitRatio
    bs3: SplitRatio
    bs4: SplitRatio
    phi: float = 0.0
    chi: float = 0.0
    convention: SignConvention = SignConvention.EXPERIMENT_MATCHED

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.chi)):
            raise ValueError("phases must be finite")

    @property
    def ratios(self) -> Ratios:
        return Ratios(self.bs1, self.bs2, self.bs3, self.bs4)

    def with_phases(self, phi: float, chi: float) -> "NmziConfig":
        return replace(self, phi=phi, chi=chi)


@dataclass(frozen=True)
class MirrorPerturbation:
    """Complex phase per mirror: Re is optical phase (rad), Im is loss."""

    a: complex = 0j
    b: complex = 0j
    c: complex = 0j
    e: complex = 0j
    f: complex = 0j

    @classmethod
    def single(cls, mirror: str, value: complex) -> "MirrorPerturbation":
        return cls(**{mirror.lower(): complex(value)})

    def __getitem__(self, mirror: str) -> complex:
        return getattr(self, mirror.lower())

    def scaled(self, s: float) -> "MirrorPerturbation":
        return MirrorPerturbation(*(s * self[m] for m in MIRRORS))

    @property
    def max_abs(self) -> float:
        return max(abs(self[m]) for m in MIRRORS)

    @property
    def is_linear_regime(self) -> bool:
        return self.max_abs <= LINEAR_REGIME


ZERO = MirrorPerturbation()


class PathAmplitudes(NamedTuple):
    a: float
    b: float
    c: float


class OutputState(NamedTuple):
    amp_D: complex
    amp_out1: complex
    amp_out2: complex

    @property
    def powers(self) -> tuple[float, float, float]:
        return abs(self.amp_D) ** 2, abs(self.amp_out1) ** 2, abs(self.amp_out2) ** 2

    @property
    def total_power(self) -> float:
        return sum(self.powers)


@dataclass(frozen=True)
class WeakTraceVector:
    """dP_D/dRe(phi_k) and dP_D/dIm(phi_k) at zero perturbation."""

    d_re: dict = field(default_factory=dict)
    d_im: dict = field(default_factory=dict)

    def __getitem__(self, mirror: str) -> tuple[float, float]:
        return self.d_re[mirror], self.d_im[mirror]

    def rows(self):
        for m in MIRRORS:
            yield m, self.d_re[m], self.d_im[m]

    def dot(self, pert: MirrorPerturbation) -> float:
        return sum(
            self.d_re[m] * pert[m].real + self.d_im[m] * pert[m].imag for m in MIRRORS
        )


def path_amplitudes(config: NmziConfig | Ratios) -> PathAmplitudes:
    bs1, bs2, bs3, bs4 = config.ratios if isinstance(config, NmziConfig) else config
    return PathAmplitudes(
        bs1.t * bs4.r,
        bs1.r * bs2.t * bs3.t * bs4.t,
        bs1.r * bs2.r * bs3.r * bs4.t,
    )


def _beam_splitter(s: SplitRatio, x: complex, y: complex) -> tuple[complex, complex]:
    return 1j * s.r * x + s.t * y, s.t * x + 1j * s.r * y


def propagate(config: NmziConfig, pert: MirrorPerturbation = ZERO) -> OutputState:
    """Unit input amplitude through BS1..BS4; returns the D, out1, out2 fields."""
    mirror = {m: cmath.exp(1j * pert[m]) for m in MIRRORS}

    # BS1, input on the port that is transmitted into U
    lower, upper = _beam_splitter(config.bs1, 1.0, 0.0)
    upper *= mirror["A"] * cmath.exp(1j * config.chi)
    lower *= mirror["E"]

    # inner MZI
    l_arm, u_arm = _beam_splitter(config.bs2, lower, 0.0)
    u_arm *= mirror["B"]
    l_arm *= mirror["C"] * cmath.exp(1j * config.convention.inner_phase(config.phi))
    out1, lower = _beam_splitter(config.bs3, u_arm, l_arm)
    lower *= mirror["F"]

    amp_d, amp_out2 = _beam_splitter(config.bs4, upper, lower)
    return OutputState(amp_d, out1, amp_out2)


def detector_field(config: NmziConfig) -> complex:
    """Unperturbed detector field with the common factor i removed."""
    a, b, c = path_amplitudes(config)
    s = config.convention.c_sign
    return a * cmath.exp(1j * config.chi) + b + s * c * cmath.exp(1j * config.phi)


def detector_power_exact(config: NmziConfig, pert: MirrorPerturbation = ZERO) -> float:
    """|a e^{i(chi+pa)} + b e^{i(pe+pb+pf)} + s c e^{i(pe+pc+pf+phi)}|^2.

    Agrees with |amp_D|^2 from propagate to rounding. Mirrors E and F enter
    only through pe + pf, so exchanging their perturbations gives the same
    float.
    """
    a, b, c = path_amplitudes(config)
    s = config.convention.c_sign
    inner = pert.e + pert.f
    total = (
        a * cmath.exp(1j * (config.chi + pert.a))
        + b * cmath.exp(1j * (inner + pert.b))
        + s * c * cmath.exp(1j * (inner + pert.c + config.phi))
    )
    return abs(total) ** 2


def _path_terms(config: NmziConfig) -> dict:
    a, b, c = path_amplitudes(config)
    s = config.convention.c_sign
    upper = a * cmath.exp(1j * config.chi)
    c_path = s * c * cmath.exp(1j * config.phi)
    return {"A": upper, "B": b + 0j, "C": c_path, "E": b + c_path, "F": b + c_path}


def first_order_coefficients(config: NmziConfig) -> WeakTraceVector:
    """Analytic first-order sensitivities of P_D.

    With F the detector field and T_k the part of F that mirror k
    multiplies, dF/dRe(phi_k) = i T_k and dF/dIm(phi_k) = -T_k, so

        d_re = 2 Im(F conj(T_k)),   d_im = -2 Re(F conj(T_k)).
    """
    total = detector_field(config)
    d_re, d_im = {}, {}
    for m, term in _path_terms(config).items():
        z = total * term.conjugate()
        d_re[m] = 2.0 * z.imag
        d_im[m] = -2.0 * z.real
    return WeakTraceVector(d_re, d_im)


def detector_power_linearized(config: NmziConfig, pert: MirrorPerturbation) -> float:
    if pert.max_abs > LINEAR_REGIME:
        raise PerturbationTooLarge(
            f"max |phi_k| = {pert.max_abs:g} exceeds {LINEAR_REGIME}"
        )
    return detector_power_exact(config) + first_order_coefficients(config).dot(pert)


def finite_difference_gradient(
    config: NmziConfig, mirror: str, step: float = 1e-6
) -> tuple[float, float]:
    """Central differences of detector_power_exact in Re and Im of one mirror."""
    if not (0.0 < step <= 1e-3):
        raise InvalidStep(f"step must lie in (0, 1e-3], got {step!r}")
    if mirror not in MIRRORS:
        raise KeyError(mirror)

    def power(delta: complex) -> float:
        return detector_power_exact(config, MirrorPerturbation.single(mirror, delta))

    d_re = (power(step) - power(-step)) / (2 * step)
    d_im = (power(1j * step) - power(-1j * step)) / (2 * step)
    return d_re, d_im

