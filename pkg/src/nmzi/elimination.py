"""
Weak-trace elimination conditions and phase solvers.

Each condition is normalized so that

    residual = (matching weak-trace coefficient) / (2 * prefactor)

with prefactor a, b, c for the single-path mirrors A, B, C and 1 for the
joint E/F rows. Zeros therefore coincide with zeros of the coefficient
whenever the prefactor is nonzero. The trig forms below carry the sign
convention s, the relative sign of the c-path term.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .optics import (
    NmziConfig,
    Ratios,
    SignConvention,
    SplitRatio,
    path_amplitudes,
)

__all__ = [
    "EliminationTarget",
    "ConditionResidual",
    "PhaseSolution",
    "Feasibility",
    "NoSolution",
    "DegenerateAmplitude",
    "DependentConditions",
    "condition_residual",
    "prefactor",
    "solve_phases",
    "feasibility",
    "sweep_curve",
    "SweepRow",
]

TWO_PI = 2.0 * math.pi
SOLVER_TOL = 1e-10


class NoSolution(ValueError):
    """Raised for an invalid pin; an empty root list is not an error."""


class DegenerateAmplitude(ValueError):
    """The condition is identically zero for these ratios."""


class DependentConditions(DegenerateAmplitude):
    """Two conditions are constant multiples of each other.

    A_RE and EF_RE always are: P_D depends on phi_a and phi_e + phi_f only
    through their difference, so d_re(A) = -d_re(E). Their common zero set
    is a curve, not a list of points.
    """


class EliminationTarget(enum.Enum):
    A_RE = "a_re"
    A_IM = "a_im"
    B_RE = "b_re"
    B_IM = "b_im"
    C_RE = "c_re"
    C_IM = "c_im"
    EF_RE = "ef_re"
    EF_IM = "ef_im"

    @property
    def mirror(self) -> str:
        return self.name.split("_")[0]

    @property
    def channel(self) -> str:
        return self.name.split("_")[1].lower()

    @classmethod
    def parse(cls, text: str) -> "EliminationTarget":
        return cls(text.strip().lower())


@dataclass(frozen=True)
class ConditionResidual:
    target: EliminationTarget
    value: float


@dataclass(frozen=True)
class PhaseSolution:
    phi: float
    chi: float
    residual_after: float


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    witness: PhaseSolution | None


def prefactor(target: EliminationTarget, ratios: Ratios) -> float:
    a, b, c = path_amplitudes(ratios)
    return {"A": a, "B": b, "C": c, "EF": 1.0}[target.mirror]


def _is_vacuous(target: EliminationTarget, ratios: Ratios) -> bool:
    a, b, c = path_amplitudes(ratios)
    if target.mirror in ("A", "B", "C"):
        return prefactor(target, ratios) == 0.0
    if target is EliminationTarget.EF_RE:
        return a == 0.0 or (b == 0.0 and c == 0.0)
    return b == 0.0 and c == 0.0


def _residual(target, a, b, c, s, phi, chi):
    """Residual and its (d/dphi, d/dchi); works on floats or arrays."""
    sin, cos = np.sin, np.cos
    T = EliminationTarget
    if target is T.A_RE:
        f = s * c * sin(phi - chi) - b * sin(chi)
        g = (s * c * cos(phi - chi), -s * c * cos(phi - chi) - b * cos(chi))
    elif target is T.A_IM:
        f = -(a + b * cos(chi) + s * c * cos(phi - chi))
        g = (s * c * sin(phi - chi), b * sin(chi) - s * c * sin(phi - chi))
    elif target is T.B_RE:
        f = a * sin(chi) + s * c * sin(phi)
        g = (s * c * cos(phi), a * cos(chi))
    elif target is T.B_IM:
        f = -(a * cos(chi) + b + s * c * cos(phi))
        g = (s * c * sin(phi), a * sin(chi))
    elif target is T.C_RE:
        f = -s * (a * sin(phi - chi) + b * sin(phi))
        g = (-s * (a * cos(phi - chi) + b * cos(phi)), s * a * cos(phi - chi))
    elif target is T.C_IM:
        f = -(s * a * cos(phi - chi) + s * b * cos(phi) + c)
        g = (s * (a * sin(phi - chi) + b * sin(phi)), -s * a * sin(phi - chi))
    elif target is T.EF_RE:
        f = a * b * sin(chi) - s * a * c * sin(phi - chi)
        g = (-s * a * c * cos(phi - chi), a * b * cos(chi) + s * a * c * cos(phi - chi))
    elif target is T.EF_IM:
        f = -(
            b * b
            + c * c
            + 2 * s * b * c * cos(phi)
            + a * b * cos(chi)
            + s * a * c * cos(phi - chi)
        )
        g = (
            2 * s * b * c * sin(phi) + s * a * c * sin(phi - chi),
            a * b * sin(chi) - s * a * c * sin(phi - chi),
        )
    else:  # pragma: no cover
        raise ValueError(target)
    return f, g


def condition_residual(target: EliminationTarget, config: NmziConfig) -> ConditionResidual:
    a, b, c = path_amplitudes(config)
    f, _ = _residual(target, a, b, c, config.convention.c_sign, config.phi, config.chi)
    return ConditionResidual(target, float(f))


class _System:
    """Residual vector for a set of targets at fixed ratios."""

    def __init__(self, targets: Sequence[EliminationTarget], ratios: Ratios, convention):
        self.targets = tuple(targets)
        self.abc = path_amplitudes(ratios)
        self.s = convention.c_sign

    def __call__(self, phi, chi):
        return [_residual(t, *self.abc, self.s, phi, chi)[0] for t in self.targets]

    def jacobian(self, phi, chi) -> np.ndarray:
        return np.array([_residual(t, *self.abc, self.s, phi, chi)[1] for t in self.targets])

    def max_abs(self, phi, chi) -> float:
        return max(abs(float(v)) for v in self(phi, chi))


def _proportional(system: _System, i: int, j: int, n: int = 48) -> bool:
    """Whether residual i is a fixed multiple of residual j (sampled on a lattice)."""
    axis = np.linspace(-math.pi, math.pi, n, endpoint=False) + 0.0123
    phi, chi = np.meshgrid(axis, axis, indexing="ij")
    values = system(phi, chi)
    u, v = np.ravel(values[i]), np.ravel(values[j])
    k = float(u @ v) / max(float(v @ v), 1e-300)
    return bool(np.abs(u - k * v).max() <= 1e-12 * max(np.abs(u).max(), 1.0))


def _drop_dependent(targets: tuple, ratios: Ratios, convention) -> tuple:
    system = _System(targets, ratios, convention)
    keep = []
    for i in range(len(targets)):
        if not any(_proportional(system, i, j) for j in keep):
            keep.append(i)
    return tuple(targets[i] for i in keep)


def _wrap(x: float) -> float:
    """Map to [-pi, pi)."""
    return (x + math.pi) % TWO_PI - math.pi


def _bisect(f, lo: float, hi: float, flo: float) -> float:
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scan_1d(f, n: int = 2000) -> list[float]:
    """Roots of a periodic scalar function on [-pi, pi): sign changes + bisection."""
    grid = np.linspace(-math.pi, math.pi, n + 1)
    values = f(grid)
    roots = []
    for k in range(n):
        lo, hi = grid[k], grid[k + 1]
        flo, fhi = values[k], values[k + 1]
        if flo == 0.0:
            roots.append(float(lo))
        elif fhi != 0.0 and (flo < 0) != (fhi < 0):
            roots.append(_bisect(f, float(lo), float(hi), float(flo)))
    # endpoints: -pi and pi are the same point
    if abs(values[0]) <= SOLVER_TOL and abs(values[-1]) <= SOLVER_TOL:
        roots.append(-math.pi)
    roots = sorted(_wrap(r) for r in roots)
    unique = []
    for r in roots:
        if not unique or r - unique[-1] > 1e-9:
            unique.append(r)
    if len(unique) > 1 and unique[0] + TWO_PI - unique[-1] <= 1e-9:
        unique.pop()
    return unique


def _newton(system: _System, phi: float, chi: float, max_iter: int = 50):
    """Gauss-Newton with step halving; returns (phi, chi, max residual)."""
    x = np.array([phi, chi], dtype=float)
    norm = np.linalg.norm(system(*x))
    for _ in range(max_iter):
        if norm <= 1e-15:
            break
        jac = system.jacobian(*x)
        step = np.linalg.lstsq(jac, -np.array(system(*x)), rcond=None)[0]
        # bisect the step length until the residual decreases
        for _ in range(40):
            trial = x + step
            trial_norm = np.linalg.norm(system(*trial))
            if trial_norm < norm:
                break
            step *= 0.5
        else:
            break
        x, norm = trial, trial_norm
    phi, chi = _wrap(float(x[0])), _wrap(float(x[1]))
    return phi, chi, system.max_abs(phi, chi)


def _connected(system: _System, p: PhaseSolution, q: PhaseSolution, tol: float) -> bool:
    """True when the residual stays within tol along the segment p -> q."""
    dphi = _wrap(q.phi - p.phi)
    dchi = _wrap(q.chi - p.chi)
    n = max(8, int(math.hypot(dphi, dchi) / 5e-3))
    w = np.linspace(0.0, 1.0, n + 1)[1:-1]
    values = np.abs(np.array(system(p.phi + w * dphi, p.chi + w * dchi)))
    return bool(values.max() <= tol)


def _dedupe(
    system: _System,
    points: Iterable[PhaseSolution],
    tol: float,
    sep: float = 1e-6,
) -> list[PhaseSolution]:
    """Drop roots within sep of a kept one, or joined to it by a flat valley.

    Tangential contacts and root continua otherwise come back as chains of
    numerically valid points; one representative per straight flat piece is
    kept.
    """
    kept: list[PhaseSolution] = []
    for p in sorted(points, key=lambda q: q.residual_after):
        for q in kept:
            dist = math.hypot(_wrap(p.phi - q.phi), _wrap(p.chi - q.chi))
            if dist < sep or _connected(system, p, q, tol):
                break
        else:
            kept.append(p)
    return sorted(kept, key=lambda q: (q.phi, q.chi))


def _grid_candidates(system: _System, n: int) -> list[tuple[float, float]]:
    """Grid cells with a sign change in every residual, plus local minima of the norm."""
    axis = np.linspace(-math.pi, math.pi, n, endpoint=False)
    phi, chi = np.meshgrid(axis, axis, indexing="ij")
    values = np.array(system(phi, chi))
    norm = np.sqrt((values ** 2).sum(axis=0))

    candidates = []
    if len(system.targets) <= 2:
        mask = np.ones((n, n), dtype=bool)
        for v in values:
            corners = np.stack(
                [v, np.roll(v, -1, 0), np.roll(v, -1, 1), np.roll(np.roll(v, -1, 0), -1, 1)]
            )
            mask &= (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)
        h = TWO_PI / n
        for i, j in zip(*np.nonzero(mask)):
            candidates.append((axis[i] + h / 2, axis[j] + h / 2))

    neighbours = [
        np.roll(np.roll(norm, di, 0), dj, 1)
        for di in (-1, 0, 1)
        for dj in (-1, 0, 1)
        if (di, dj) != (0, 0)
    ]
    minima = norm <= np.min(neighbours, axis=0)
    # a cell-sized move changes each residual by at most ~2 * h * |grad|
    minima &= norm <= 4.0 * TWO_PI / n
    for i, j in zip(*np.nonzero(minima)):
        candidates.append((axis[i], axis[j]))
    return candidates


def _search_2d(system: _System, n: int, tol: float) -> list[PhaseSolution]:
    found = []
    for phi0, chi0 in _grid_candidates(system, n):
        phi, chi, res = _newton(system, phi0, chi0)
        if res <= tol:
            found.append(PhaseSolution(phi, chi, res))
    return _dedupe(system, found, tol)


def _check_targets(targets, ratios):
    targets = tuple(dict.fromkeys(targets))
    for t in targets:
        if _is_vacuous(t, ratios):
            raise DegenerateAmplitude(f"{t.name} is identically satisfied for these ratios")
    return targets


def solve_phases(
    targets: Iterable[EliminationTarget],
    ratios: Ratios,
    pin: tuple[str, float] | None = None,
    convention: SignConvention = SignConvention.EXPERIMENT_MATCHED,
    grid: int = 360,
    tol: float = SOLVER_TOL,
) -> list[PhaseSolution]:
    """All (phi, chi) in [-pi, pi) satisfying the targets.

    One target needs ``pin=("phi", value)`` or ``("chi", value)`` and is
    solved by a 1-D scan over the free phase with bisection refinement.
    Two targets are solved on a ``grid`` x ``grid`` lattice with Newton
    refinement; no pin is allowed then.
    """
    targets = _check_targets(targets, ratios)
    if len(targets) not in (1, 2):
        raise ValueError("solve_phases takes one or two targets")
    system = _System(targets, ratios, convention)

    if len(targets) == 2:
        if pin is not None:
            raise NoSolution("two conditions fix both phases; no pin allowed")
        if len(_drop_dependent(targets, ratios, convention)) == 1:
            raise DependentConditions(
                f"{targets[0].name} and {targets[1].name} vanish together on a curve; "
                "pin a phase and solve one of them")
        return _search_2d(system, grid, tol)

    if pin is None:
        raise NoSolution("a single condition needs one pinned phase")
    name, value = pin
    if name not in ("phi", "chi") or not math.isfinite(value):
        raise NoSolution(f"invalid pin {pin!r}")

    if name == "chi":
        f = lambda x: system(x, value)[0]  # noqa: E731
    else:
        f = lambda x: system(value, x)[0]  # noqa: E731
    out = []
    for root in _scan_1d(f):
        phi, chi = (root, value) if name == "chi" else (value, root)
        res = system.max_abs(phi, chi)
        if res <= tol:
            out.append(PhaseSolution(phi, chi, res))
    return out


def feasibility(
    targets: Iterable[EliminationTarget],
    ratios: Ratios,
    convention: SignConvention = SignConvention.EXPERIMENT_MATCHED,
    grid: int = 360,
    tol: float = 1e-8,
) -> Feasibility:
    """Whether up to three conditions hold at a common (phi, chi).

    Lattice seeds are refined in order of increasing residual norm and the
    first one that converges is the witness. Conditions proportional to an
    earlier one are dropped first; they vanish wherever it does.
    """
    targets = _check_targets(targets, ratios)
    if not 1 <= len(targets) <= 3:
        raise ValueError("feasibility takes one to three targets")
    full = _System(targets, ratios, convention)
    system = _System(_drop_dependent(targets, ratios, convention), ratios, convention)
    seeds = _grid_candidates(system, grid)
    seeds.sort(key=lambda p: float(np.linalg.norm(system(*p))))
    for phi0, chi0 in seeds:
        phi, chi, _ = _newton(system, phi0, chi0)
        norm = float(np.linalg.norm(full(phi, chi)))
        if norm <= tol:
            return Feasibility(True, PhaseSolution(phi, chi, norm))
    return Feasibility(False, None)


@dataclass(frozen=True)
class SweepRow:
    r2: float
    chi: float
    phi: float | None


def sweep_curve(
    target: EliminationTarget,
    ratios: Ratios,
    r2_values: Sequence[float],
    chi_grid: Sequence[float],
    convention: SignConvention = SignConvention.EXPERIMENT_MATCHED,
) -> list[SweepRow]:
    """Smallest-|phi| root of one condition for each (r2, chi).

    BS2 is replaced by the given amplitude reflectivity. A missing root is
    reported as ``phi=None``.
    """
    rows = []
    for r2 in r2_values:
        if not 0.0 < r2 < 1.0:
            raise ValueError(f"r2 must lie in (0, 1), got {r2!r}")
        swept = ratios._replace(bs2=SplitRatio.from_r(r2))
        for chi in chi_grid:
            roots = solve_phases([target], swept, pin=("chi", chi), convention=convention)
            phi = min((s.phi for s in roots), key=abs, default=None)
            rows.append(SweepRow(r2, chi, phi))
    return rows
