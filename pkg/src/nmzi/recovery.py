"""
Auxiliary-port powers and their inversion to the interferometer phases.

D2 watches out1 (the inner MZI's free port) and D3 watches out2. With
psi the physical phase on the lower inner arm (phi, or phi + pi under
the experiment-matched convention):

    P_D2 = r1^2 (t2^2 r3^2 + r2^2 t3^2) + 2 r1^2 t2 r2 t3 r3 cos psi
    P_D3 = t1^2 t4^2 + r1^2 r4^2 M^2 + 2 t1 t4 r1 r4 M cos(chi + beta)

where Z = r2 r3 e^{i psi} - t2 t3 is the inner field sent toward BS4,
M = |Z| and beta = arg(conj Z). P_D3 is a sinusoid in chi, so chi comes
back through arccos and only up to the reflection chi -> -2 beta - chi.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .optics import NmziConfig, Ratios, SignConvention

__all__ = [
    "AuxiliaryPowers",
    "RecoveredPhases",
    "OutOfFringeRange",
    "DegenerateInnerMzi",
    "DegenerateOuterMzi",
    "power_out1",
    "power_out2",
    "auxiliary_powers",
    "fringe_range_out1",
    "inner_offset",
    "arccos_beta",
    "recover_phi",
    "recover_chi",
    "recover_phases",
]

CLAMP = 1e-9
DEGENERATE = 1e-12
# arguments this close to +-1 are a fringe extremum up to rounding
SNAP = 4 * 2.220446049250313e-16


class OutOfFringeRange(ValueError):
    pass


class DegenerateInnerMzi(ValueError):
    pass


class DegenerateOuterMzi(ValueError):
    pass


@dataclass(frozen=True)
class AuxiliaryPowers:
    p_d2: float
    p_d3: float


@dataclass(frozen=True)
class RecoveredPhases:
    phi: float
    chi: float
    beta: float


def _inner_field(phi: float, ratios: Ratios, convention: SignConvention) -> complex:
    _, bs2, bs3, _ = ratios
    psi = convention.inner_phase(phi)
    return bs2.r * bs3.r * cmath.exp(1j * psi) - bs2.t * bs3.t


def _out1_terms(ratios: Ratios) -> tuple[float, float]:
    bs1, bs2, bs3, _ = ratios
    r1sq = bs1.r ** 2
    mean = r1sq * ((bs2.t * bs3.r) ** 2 + (bs2.r * bs3.t) ** 2)
    swing = 2.0 * r1sq * bs2.t * bs2.r * bs3.t * bs3.r
    return mean, swing


def power_out1(config: NmziConfig) -> float:
    mean, swing = _out1_terms(config.ratios)
    return mean + swing * math.cos(config.convention.inner_phase(config.phi))


def power_out2(config: NmziConfig) -> float:
    bs1, _, _, bs4 = config.ratios
    z = _inner_field(config.phi, config.ratios, config.convention)
    outer = bs1.t * bs4.t
    inner = bs1.r * bs4.r
    return (
        outer ** 2
        + inner ** 2 * abs(z) ** 2
        + 2.0 * outer * inner * (cmath.exp(1j * config.chi) * z.conjugate()).real
    )


def auxiliary_powers(config: NmziConfig) -> AuxiliaryPowers:
    return AuxiliaryPowers(power_out1(config), power_out2(config))


def fringe_range_out1(ratios: Ratios) -> tuple[float, float]:
    mean, swing = _out1_terms(ratios)
    return mean - swing, mean + swing


def inner_offset(phi: float, ratios: Ratios, convention: SignConvention) -> float:
    """beta = arg(conj Z), so that the D3 fringe goes as cos(chi + beta)."""
    return -cmath.phase(_inner_field(phi, ratios, convention))


def arccos_beta(phi: float, ratios: Ratios) -> float:
    """arccos[(r2 r3 - t2 t3 cos phi) / M], the offset for an inner phase on the b-arm.

    Equals inner_offset(-phi, ..., AS_WRITTEN) - phi (mod 2 pi) for phi in [0, pi].
    """
    _, bs2, bs3, _ = ratios
    rr, tt = bs2.r * bs3.r, bs2.t * bs3.t
    m = math.sqrt(max(rr * rr + tt * tt - 2 * rr * tt * math.cos(phi), 0.0))
    if m < DEGENERATE:
        raise DegenerateOuterMzi("no inner light reaches BS4")
    return _arccos((rr - tt * math.cos(phi)) / m)


def _arccos(x: float) -> float:
    if abs(x) > 1.0 + CLAMP:
        raise OutOfFringeRange(f"arccos argument {x:.12g} is outside [-1, 1]")
    if x >= 1.0 - SNAP:
        return 0.0
    if x <= -1.0 + SNAP:
        return math.pi
    return math.acos(x)


def recover_phi(
    p_d2: float,
    ratios: Ratios,
    convention: SignConvention = SignConvention.AS_WRITTEN,
) -> float:
    """Principal-branch inner phase in [0, pi] from the D2 power."""
    mean, swing = _out1_terms(ratios)
    if swing < DEGENERATE:
        raise DegenerateInnerMzi("inner interferometer shows no fringe")
    x = (p_d2 - mean) / swing
    if convention is SignConvention.EXPERIMENT_MATCHED:
        x = -x
    return _arccos(x)


def recover_chi(
    p_d3: float,
    phi: float,
    ratios: Ratios,
    convention: SignConvention = SignConvention.AS_WRITTEN,
) -> tuple[float, float]:
    """Outer phase in [0, pi] and the offset beta, given the inner phase.

    chi = arccos(u) - beta when that lands in [0, pi], otherwise the
    reflected root -arccos(u) - beta.
    """
    bs1, _, _, bs4 = ratios
    z = _inner_field(phi, ratios, convention)
    m = abs(z)
    swing = 2.0 * bs1.t * bs4.t * bs1.r * bs4.r * m
    if swing < DEGENERATE:
        raise DegenerateOuterMzi("outer interferometer shows no fringe")
    mean = (bs1.t * bs4.t) ** 2 + (bs1.r * bs4.r * m) ** 2
    alpha = _arccos((p_d3 - mean) / swing)
    beta = -cmath.phase(z)

    candidates = [_wrap(alpha - beta), _wrap(-alpha - beta)]
    for chi in candidates:
        if -CLAMP <= chi <= math.pi + CLAMP:
            return min(max(chi, 0.0), math.pi), beta
    # both roots negative: fold onto the principal range
    return abs(candidates[0]), beta


def _wrap(x: float) -> float:
    """Map to (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


def recover_phases(
    powers: AuxiliaryPowers,
    ratios: Ratios,
    convention: SignConvention = SignConvention.AS_WRITTEN,
) -> RecoveredPhases:
    phi = recover_phi(powers.p_d2, ratios, convention)
    chi, beta = recover_chi(powers.p_d3, phi, ratios, convention)
    return RecoveredPhases(phi, chi, beta)
