"""Critical surfaces where the condensed and normal phases exchange
stability.

The phase boundary is the locus F_cond = F_norm of the restricted free
energies.  This module solves that crossing along one parameter at a
time (temperature at fixed coupling, coupling at fixed temperature, or
coupling at zero temperature where the crossing degenerates to the
ground-energy condition E_cond = E_norm), assembles critical curves
over parameter sweeps, and provides the two scans used to probe the
universal features of the boundary: the large-coupling linear asymptote
T_c/J -> 1/(k_B log 2) and the divergence of dT_c/dJ approaching the
zero-temperature critical point.

Free energies enter through family objects exposing
``free_energies(j, gamma, t) -> (f_cond, f_norm)`` with t = 0 meaning
the ground-state energies.  Two families are provided for the fully
connected marked-state model: the closed forms, and dense spectra of
the two standalone blocks at finite size.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .configspace import ModelSpec, Partition
from .errors import InvalidBeta, NoBracket, NonConvergence
from .exactthermo import build_hamiltonian
from .models import GroverSpec, grover_free_energies

MAX_ITERATIONS = 200
EXPANSION_FACTOR = 2.0
MAX_EXPANSIONS = 60
DEFAULT_TOL = 1e-10

METHOD_CLOSED = "closed_form"
METHOD_SPECTRAL = "spectral_finite_size"

__all__ = [
    "CriticalCurve",
    "CriticalPoint",
    "CurvePoint",
    "GroverClosedFormFamily",
    "GroverSpectralFamily",
    "critical_curve",
    "critical_gamma",
    "critical_temperature",
    "gamma_asymptote",
    "grover_gamma_limit",
    "grover_t0_energy_pair",
    "qcp_slope_scan",
    "t0_crossing",
    "write_curve_csv",
]


@dataclass(frozen=True)
class CriticalPoint:
    """One solved crossing: the parameter value, the residual
    |F_cond - F_norm| there, the iteration count, and whether the
    bracket was degenerate (difference identically zero, in which case
    the value is the bracket midpoint)."""

    value: float
    residual: float
    iterations: int
    degenerate: bool = False


def _solve_crossing(pair_fn, bracket, tol: float) -> CriticalPoint:
    """Root of F_cond(x) - F_norm(x) on a sign-changing bracket.

    Bisection with a secant step every other iteration; success needs
    the residual within tol*max(1, |F_norm|) and the bracket collapsed
    to floating-point width, so the returned value is limited by the
    conditioning of the difference, not by an early residual stop.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise NoBracket(f"bracket ({lo}, {hi}) is not an increasing pair")

    def diff(x):
        f_c, f_n = pair_fn(x)
        return f_c - f_n, tol * max(1.0, abs(f_n))

    d_lo, s_lo = diff(lo)
    d_hi, s_hi = diff(hi)
    if d_lo == 0.0 and d_hi == 0.0:
        mid = 0.5 * (lo + hi)
        d_mid, _ = diff(mid)
        if d_mid == 0.0:
            return CriticalPoint(value=mid, residual=0.0, iterations=0,
                                 degenerate=True)
    if d_lo == 0.0:
        return CriticalPoint(value=lo, residual=0.0, iterations=0)
    if d_hi == 0.0:
        return CriticalPoint(value=hi, residual=0.0, iterations=0)
    if math.copysign(1.0, d_lo) == math.copysign(1.0, d_hi):
        raise NoBracket(
            f"F_cond - F_norm has the same sign at {lo} ({d_lo:+.3e}) "
            f"and {hi} ({d_hi:+.3e})")

    best_x, best_d, best_s = lo, d_lo, s_lo
    if abs(d_hi) < abs(d_lo):
        best_x, best_d, best_s = hi, d_hi, s_hi
    for iteration in range(1, MAX_ITERATIONS + 1):
        mid = 0.5 * (lo + hi)
        if iteration % 2 == 0 and d_hi != d_lo:
            secant = hi - d_hi * (hi - lo) / (d_hi - d_lo)
            if lo < secant < hi:
                mid = secant
        d_mid, s_mid = diff(mid)
        if abs(d_mid) < abs(best_d):
            best_x, best_d, best_s = mid, d_mid, s_mid
        width_tol = 1e-14 + 8.0 * np.finfo(float).eps * max(abs(lo), abs(hi))
        if abs(best_d) <= best_s and (hi - lo) <= width_tol:
            return CriticalPoint(value=float(best_x), residual=float(abs(best_d)),
                                 iterations=iteration)
        if d_mid == 0.0:
            return CriticalPoint(value=float(mid), residual=0.0,
                                 iterations=iteration)
        if math.copysign(1.0, d_mid) == math.copysign(1.0, d_lo):
            lo, d_lo = mid, d_mid
        else:
            hi, d_hi = mid, d_mid
    raise NonConvergence(
        f"crossing solver did not meet residual {tol:g} within "
        f"{MAX_ITERATIONS} iterations (best |F_cond - F_norm| = {abs(best_d):.3e})")


def critical_temperature(free_energy_pair, bracket, tol: float = DEFAULT_TOL):
    """Solve F_cond(T) = F_norm(T) for T on the given bracket.

    free_energy_pair maps T to (F_cond, F_norm); T = 0 must be handled
    by the caller's function if included in the bracket (ground
    energies).  Raises NoBracket without a sign change and
    NonConvergence after 200 iterations.
    """
    return _solve_crossing(free_energy_pair, bracket, tol)


def critical_gamma(free_energy_pair, bracket, tol: float = DEFAULT_TOL):
    """Solve F_cond(gamma) = F_norm(gamma) at fixed temperature."""
    return _solve_crossing(free_energy_pair, bracket, tol)


class GroverClosedFormFamily:
    """Closed-form restricted free energies of the marked-state model.

    F_cond = -J*N for all T; F_norm = -N*k_B*T*log(2 cosh(Gamma/(k_B*T)))
    with the T = 0 limit -Gamma*N.  The crossing is size-independent, so
    n_qubits only sets the overall scale.
    """

    method = METHOD_CLOSED
    curve_n = None

    def __init__(self, k_B: float = 1.0, n_qubits: int = 1):
        if k_B <= 0:
            raise ValueError("k_B must be positive")
        self.k_B = k_B
        self.n_qubits = n_qubits

    def free_energies(self, j: float, gamma: float, t: float):
        n = self.n_qubits
        if t < 0:
            raise InvalidBeta("temperature must be nonnegative")
        if t == 0.0:
            return (-j * n, -gamma * n)
        return grover_free_energies(n, j, gamma, 1.0 / (self.k_B * t))


class GroverSpectralFamily:
    """Finite-size restricted free energies from dense block spectra.

    The condensed block is the single marked configuration, so
    F_cond = -J*N exactly.  The normal block has zero potential and its
    matrix is gamma times a fixed hopping matrix, so one spectrum at
    gamma = 1 serves every (j, gamma, t).
    """

    method = METHOD_SPECTRAL

    def __init__(self, n_qubits: int, k_B: float = 1.0):
        if k_B <= 0:
            raise ValueError("k_B must be positive")
        self.n_qubits = n_qubits
        self.k_B = k_B

    @property
    def curve_n(self):
        return self.n_qubits

    @cached_property
    def _norm_levels(self) -> np.ndarray:
        ref = GroverSpec(n_qubits=self.n_qubits, j=1.0, gamma=1.0)
        hm = build_hamiltonian(ref.model(), ref.partition(), "norm")
        return np.linalg.eigvalsh(hm.entries)

    def free_energies(self, j: float, gamma: float, t: float):
        n = self.n_qubits
        f_cond = -j * n
        if t < 0:
            raise InvalidBeta("temperature must be nonnegative")
        levels = gamma * self._norm_levels
        if t == 0.0:
            return (f_cond, float(levels[0]))
        beta = 1.0 / (self.k_B * t)
        f_norm = float(-logsumexp(-beta * levels) / beta)
        return (f_cond, f_norm)


def _expand_t_bracket(pair_fn, d_zero: float, hi: float):
    """Grow the upper edge geometrically until the difference changes
    sign against its T = 0 value."""
    for _ in range(MAX_EXPANSIONS + 1):
        f_c, f_n = pair_fn(hi)
        d_hi = f_c - f_n
        if d_hi == 0.0 or math.copysign(1.0, d_hi) != math.copysign(1.0, d_zero):
            return hi
        hi *= EXPANSION_FACTOR
    raise NoBracket(
        f"no sign change in F_cond - F_norm up to T = {hi:g} "
        f"after {MAX_EXPANSIONS} expansions")


def _solve_point(family, j: float, gamma: float, tol: float) -> CriticalPoint:
    """Critical temperature at one (j, gamma), bracket grown from T=0."""

    def pair(t):
        return family.free_energies(j, gamma, t)

    f_c0, f_n0 = pair(0.0)
    d0 = f_c0 - f_n0
    if d0 == 0.0:
        return CriticalPoint(value=0.0, residual=0.0, iterations=0)
    if d0 > 0.0:
        raise NoBracket("condensed phase absent already at T = 0")
    hi = _expand_t_bracket(pair, d0, max(1.0, j) / family.k_B)
    return _solve_crossing(pair, (0.0, hi), tol)


@dataclass(frozen=True)
class CurvePoint:
    """One sweep point; critical_value None marks a phase-absent point."""

    sweep_value: float
    critical_value: float | None
    residual: float | None
    degenerate: bool = False

    @property
    def phase_present(self) -> bool:
        return self.critical_value is not None


@dataclass(frozen=True)
class CriticalCurve:
    """A critical curve along one swept parameter."""

    axis: str
    points: tuple
    method: str
    n_qubits: int | None

    def __post_init__(self):
        sweeps = [p.sweep_value for p in self.points]
        if sweeps != sorted(sweeps):
            raise ValueError("curve points must be sorted by the swept parameter")

    def present_points(self) -> tuple:
        return tuple(p for p in self.points if p.phase_present)


def critical_curve(family, j: float, sweep, tol: float = DEFAULT_TOL,
                   axis: str = "gamma") -> CriticalCurve:
    """Critical temperature at each coupling in the sweep.

    Points where the condensed phase is absent (no bracket) are kept in
    the curve with critical_value None; the sweep never aborts.
    """
    values = sorted(float(g) for g in sweep)
    if not values:
        raise ValueError("sweep grid must be nonempty")
    points = []
    for g in values:
        try:
            cp = _solve_point(family, j, g, tol)
        except NoBracket:
            points.append(CurvePoint(sweep_value=g, critical_value=None,
                                     residual=None))
        else:
            points.append(CurvePoint(sweep_value=g, critical_value=cp.value,
                                     residual=cp.residual,
                                     degenerate=cp.degenerate))
    return CriticalCurve(axis=axis, points=tuple(points),
                         method=family.method, n_qubits=family.curve_n)


def grover_gamma_limit(k_B: float = 1.0) -> float:
    """Large-coupling limit of T_c(J)/J for the marked-state model."""
    return 1.0 / (k_B * math.log(2.0))


@dataclass(frozen=True)
class AsymptoteEstimate:
    j: float
    ratio: float | None


@dataclass(frozen=True)
class AsymptoteScan:
    """T_c(J)/J along increasing J at fixed gamma; trend summarizes the
    direction of the defined ratios."""

    gamma: float
    estimates: tuple
    trend: str

    def ratios(self) -> tuple:
        return tuple(e.ratio for e in self.estimates if e.ratio is not None)


def gamma_asymptote(family, j_values, gamma: float,
                    tol: float = DEFAULT_TOL) -> AsymptoteScan:
    """Estimate the slope T_c(J)/J at each J; phase-absent J gives no
    estimate (ratio None)."""
    js = [float(j) for j in j_values]
    if js != sorted(js) or len(set(js)) != len(js):
        raise ValueError("j_values must be strictly increasing")
    rows = []
    for j in js:
        try:
            cp = _solve_point(family, j, gamma, tol)
        except NoBracket:
            rows.append(AsymptoteEstimate(j=j, ratio=None))
        else:
            rows.append(AsymptoteEstimate(j=j, ratio=cp.value / j))
    ratios = [r.ratio for r in rows if r.ratio is not None]
    deltas = [b - a for a, b in zip(ratios, ratios[1:])]
    if deltas and all(d > 0 for d in deltas):
        trend = "increasing"
    elif deltas and all(d < 0 for d in deltas):
        trend = "decreasing"
    else:
        trend = "mixed"
    return AsymptoteScan(gamma=gamma, estimates=tuple(rows), trend=trend)


@dataclass(frozen=True)
class SlopeScan:
    """Central-difference slopes dT_c/dJ at J = j_c + offset."""

    j_c: float
    gamma: float
    offsets: tuple
    slopes: tuple


def qcp_slope_scan(family, j_c: float, offsets, gamma: float | None = None,
                   tol: float = DEFAULT_TOL,
                   step_fraction: float = 0.25) -> SlopeScan:
    """Slopes of T_c(J) at J = j_c + offset for each offset.

    offsets must be positive and strictly decreasing; the finite
    difference uses a step of step_fraction * offset so both stencil
    points stay inside the phase region.
    """
    offs = [float(o) for o in offsets]
    if not offs or any(o <= 0 for o in offs):
        raise ValueError("offsets must be positive")
    if offs != sorted(offs, reverse=True) or len(set(offs)) != len(offs):
        raise ValueError("offsets must be strictly decreasing")
    if not 0.0 < step_fraction < 1.0:
        raise ValueError("step_fraction must lie in (0, 1)")
    if gamma is None:
        gamma = j_c
    slopes = []
    for off in offs:
        j = j_c + off
        h = step_fraction * off
        hi = _solve_point(family, j + h, gamma, tol).value
        lo = _solve_point(family, j - h, gamma, tol).value
        slopes.append((hi - lo) / (2.0 * h))
    return SlopeScan(j_c=j_c, gamma=gamma, offsets=tuple(offs),
                     slopes=tuple(slopes))


def grover_t0_energy_pair(n_qubits: int, j: float):
    """Ground energies (E_cond, E_norm) of the two standalone blocks as
    a function of gamma, with the normal-block spectrum computed once.

    j may be zero here (phase absent); the reference block matrix does
    not involve it.
    """
    ref = GroverSpec(n_qubits=n_qubits, j=1.0, gamma=1.0)
    hm = build_hamiltonian(ref.model(), ref.partition(), "norm")
    lam_min = float(np.linalg.eigvalsh(hm.entries)[0])
    e_cond = -float(j) * n_qubits

    def pair(gamma: float):
        return (e_cond, gamma * lam_min)

    return pair


def spec_t0_energy_pair(spec_at):
    """Ground energies of the two blocks for an arbitrary model family,
    one dense diagonalization pair per evaluation.

    spec_at maps gamma to (ModelSpec, Partition).
    """

    def pair(gamma: float):
        spec, p = spec_at(gamma)
        if not isinstance(spec, ModelSpec) or not isinstance(p, Partition):
            raise TypeError("spec_at must return (ModelSpec, Partition)")
        e_c = float(np.linalg.eigvalsh(
            build_hamiltonian(spec, p, "cond").entries)[0])
        e_n = float(np.linalg.eigvalsh(
            build_hamiltonian(spec, p, "norm").entries)[0])
        return (e_c, e_n)

    return pair


def t0_crossing(energy_pair, bracket, tol: float = DEFAULT_TOL) -> CriticalPoint:
    """Zero-temperature critical coupling: root of E_cond - E_norm.

    energy_pair maps gamma to the two standalone ground energies; use
    grover_t0_energy_pair or spec_t0_energy_pair to build one.
    """
    return _solve_crossing(energy_pair, bracket, tol)


def write_curve_csv(fileobj, curve: CriticalCurve) -> None:
    """Rows sweep_value,critical_value,residual,method,N; phase-absent
    points leave the solved columns empty."""
    writer = csv.writer(fileobj)
    writer.writerow(["sweep_value", "critical_value", "residual", "method", "N"])
    n_txt = "" if curve.n_qubits is None else str(curve.n_qubits)
    for p in curve.points:
        writer.writerow([
            repr(p.sweep_value),
            "" if p.critical_value is None else repr(p.critical_value),
            "" if p.residual is None else repr(p.residual),
            curve.method,
            n_txt,
        ])
