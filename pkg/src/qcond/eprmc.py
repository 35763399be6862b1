"""Trajectory-sampling Monte Carlo for diagonal elements of e^{-Ht}.

The imaginary-time propagator has the probabilistic representation

    <n0| e^{-Ht} |n0> = E[ M * delta(final config = n0) ]

over the continuous-time Markov chain that jumps between neighboring
configurations at rate Gamma*A(n) (A(n) = N here) and accumulates the
stochastic functional M = exp( sum of (Gamma*A - V) * sojourn ).  This
module provides single-trajectory sampling for inspection, batched
estimators with a compiled kernel (pure-Python fallback), constrained
estimators keyed on boundary-transit counters, and the crossing
probability bounds check.

Reproducibility contract: trajectory i consumes its own Philox stream
(key = seed, counter block = i), the sampling order is fixed by the
trajectory index, and reductions run in a single deterministic pass, so
results depend only on (model, start, t, n_samples, seed) and never on
the number of workers.  Set QCOND_PURE=1 to force the pure kernel.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _ctmc_py
from .configspace import Configuration, ModelSpec, Partition
from .errors import BoundViolation, WrongSide

try:
    from . import _ctmc
except ImportError:
    _ctmc = None

if os.environ.get("QCOND_PURE"):
    _kernel = _ctmc_py
else:
    _kernel = _ctmc if _ctmc is not None else _ctmc_py

CHUNK = 4096
BOUNDARY_CAP = 1024

CONSTRAINTS = ("k_t=0", "k_t>=1", "l_t=0", "l_t>=1")

__all__ = [
    "CONSTRAINTS",
    "CrossingReport",
    "EstimatorResult",
    "TransitCounters",
    "Trajectory",
    "crossing_probability_report",
    "estimate_constrained",
    "estimate_diagonal",
    "factorization_diagnostic",
    "kernel_backend",
    "sample_trajectory",
    "transit_counters",
]


def kernel_backend() -> str:
    """Name of the batch kernel in use: 'compiled' or 'pure'."""
    return "pure" if _kernel is _ctmc_py else "compiled"


@dataclass(frozen=True)
class Trajectory:
    """One sampled path: jump times with the configuration after each
    jump, the log of the stochastic functional, and the configuration
    held when the horizon was reached."""

    start: Configuration
    t: float
    jumps: tuple
    log_weight: float
    final_config: Configuration

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)


@dataclass(frozen=True)
class TransitCounters:
    k_t: int
    l_t: int
    q_t: int


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {"estimate": self.mean, "std_error": self.std_error,
                "n_samples": self.n_samples, "seed": self.seed}


def sample_trajectory(spec: ModelSpec, start: Configuration, t: float,
                      rng_stream) -> Trajectory:
    """Draw one trajectory from rng_stream (a numpy Generator).

    Consumes uniforms in the same order as the batch kernels: one for
    each waiting time, one for each flipped bit.
    """
    if start.n_qubits != spec.n_qubits:
        raise ValueError("start configuration and spec disagree on n_qubits")
    if t < 0:
        raise ValueError("horizon t must be nonnegative")
    n = spec.n_qubits
    rate = spec.gamma * n
    bits = start.bits
    s = 0.0
    logw = 0.0
    jumps = []
    if rate > 0.0 and t > 0.0:
        while True:
            u1 = rng_stream.random()
            dt = math.inf if u1 <= 0.0 else -math.log(u1) / rate
            s_next = s + dt
            if s_next >= t:
                break
            logw += (rate - spec.potential_value(bits)) * dt
            s = s_next
            u2 = rng_stream.random()
            j = int(u2 * n)
            if j >= n:
                j = n - 1
            bits ^= 1 << j
            jumps.append((s, Configuration(bits, n)))
    logw += (rate - spec.potential_value(bits)) * (t - s)
    return Trajectory(start=start, t=t, jumps=tuple(jumps),
                      log_weight=float(logw), final_config=Configuration(bits, n))


def transit_counters(traj: Trajectory, p: Partition) -> TransitCounters:
    """Replay the partition crossings of one trajectory.

    q_t counts entries into cond; k_t counts cond sojourns entered from
    norm and left again before the horizon; l_t is the norm-side mirror.
    Sojourns still open at the horizon close no transit.
    """
    if traj.start.n_qubits != p.n_qubits:
        raise ValueError("trajectory and partition disagree on n_qubits")
    in_cond = p.contains(traj.start.bits)
    cond_open = False
    norm_open = False
    k = l = q = 0
    for _, config in traj.jumps:
        now_cond = p.contains(config.bits)
        if now_cond == in_cond:
            continue
        if now_cond:
            q += 1
            if norm_open:
                l += 1
                norm_open = False
            cond_open = True
        else:
            if cond_open:
                k += 1
                cond_open = False
            norm_open = True
        in_cond = now_cond
    return TransitCounters(k_t=k, l_t=l, q_t=q)


def _run_indexed(spec: ModelSpec, start_bits: int, t: float, n_samples: int,
                 seed: int, p: Partition | None, workers: int,
                 base_index: int = 0):
    """Sample trajectories [base_index, base_index + n_samples) into
    index-ordered arrays; identical output for any worker count."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    vkind, vu64, vf64 = spec.potential.kernel_params()
    cond_bits = p.cond if p is not None else None
    weights = np.empty(n_samples)
    finals = np.empty(n_samples, dtype=np.uint64)
    njumps = np.empty(n_samples, dtype=np.int64)
    if p is not None:
        kt = np.empty(n_samples, dtype=np.int64)
        lt = np.empty(n_samples, dtype=np.int64)
        qt = np.empty(n_samples, dtype=np.int64)
    else:
        kt = lt = qt = None

    def run_slice(lo, hi):
        _kernel.run_batch(
            seed, base_index + lo, hi - lo, spec.n_qubits, spec.gamma, t,
            start_bits, vkind, vu64, vf64, cond_bits,
            weights[lo:hi], finals[lo:hi], njumps[lo:hi],
            kt[lo:hi] if kt is not None else None,
            lt[lo:hi] if lt is not None else None,
            qt[lo:hi] if qt is not None else None)

    bounds = [(lo, min(lo + CHUNK, n_samples)) for lo in range(0, n_samples, CHUNK)]
    if workers == 1 or len(bounds) == 1:
        for lo, hi in bounds:
            run_slice(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: run_slice(*b), bounds))
    return weights, finals, njumps, kt, lt, qt


def _reduce(values: np.ndarray, n_samples: int, seed: int) -> EstimatorResult:
    mean = float(np.sum(values) / n_samples)
    if n_samples > 1:
        se = float(np.std(values, ddof=1) / math.sqrt(n_samples))
    else:
        se = 0.0
    return EstimatorResult(mean=mean, std_error=se, n_samples=n_samples, seed=seed)


def _as_bits(n0) -> int:
    return n0.bits if isinstance(n0, Configuration) else int(n0)


def estimate_diagonal(spec: ModelSpec, n0, t: float, n_samples: int,
                      seed: int, workers: int = 1) -> EstimatorResult:
    """MC estimate of <n0|e^{-Ht}|n0>."""
    bits = _as_bits(n0)
    weights, finals, _, _, _, _ = _run_indexed(
        spec, bits, t, n_samples, seed, None, workers)
    values = np.where(finals == np.uint64(bits), weights, 0.0)
    return _reduce(values, n_samples, seed)


def _constraint_mask(constraint: str, kt: np.ndarray, lt: np.ndarray) -> np.ndarray:
    if constraint == "k_t=0":
        return kt == 0
    if constraint == "k_t>=1":
        return kt >= 1
    if constraint == "l_t=0":
        return lt == 0
    if constraint == "l_t>=1":
        return lt >= 1
    raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {constraint!r}")


def estimate_constrained(spec: ModelSpec, p: Partition, n0, t: float,
                         constraint: str, n_samples: int, seed: int,
                         workers: int = 1) -> EstimatorResult:
    """MC estimate of <n0|e^{-Ht}|n0> restricted to trajectories obeying
    a transit-counter constraint.

    With constraint 'k_t=0' and n0 in norm this estimates the restricted
    block element <n0|e^{-H_norm t}|n0>: trajectories that never complete
    a transit through cond and return to n0 never left the norm block.
    """
    if constraint not in CONSTRAINTS:
        raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {constraint!r}")
    bits = _as_bits(n0)
    in_cond = p.contains(bits)
    if constraint.startswith("k") and in_cond:
        raise WrongSide("k_t constraints need a start in the normal subspace")
    if constraint.startswith("l") and not in_cond:
        raise WrongSide("l_t constraints need a start in the condensed subspace")
    weights, finals, _, kt, lt, _ = _run_indexed(
        spec, bits, t, n_samples, seed, p, workers)
    mask = _constraint_mask(constraint, kt, lt)
    values = np.where((finals == np.uint64(bits)) & mask, weights, 0.0)
    return _reduce(values, n_samples, seed)


@dataclass(frozen=True)
class CrossingReport:
    """Largest boundary-start probability of completing a transit,
    against the closed bound 1 - exp(-Gamma * A_norm_out * t)."""

    side: str
    t: float
    counter: str
    bound: float
    max_estimate: float
    std_error_at_max: float
    argmax_start: int
    n_starts: int
    n_samples_per_start: int
    seed: int
    estimates: tuple

    @property
    def satisfied(self) -> bool:
        return self.max_estimate <= self.bound + 3.0 * self.std_error_at_max

    def to_dict(self) -> dict:
        return {
            "side": self.side, "t": self.t, "counter": self.counter,
            "bound": self.bound, "max_estimate": self.max_estimate,
            "std_error_at_max": self.std_error_at_max,
            "argmax_start": self.argmax_start, "n_starts": self.n_starts,
            "n_samples_per_start": self.n_samples_per_start, "seed": self.seed,
        }


def crossing_probability_report(spec: ModelSpec, p: Partition, side: str,
                                t: float, n_samples: int, seed: int,
                                workers: int = 1,
                                boundary_cap: int = BOUNDARY_CAP) -> CrossingReport:
    """Estimate sup over boundary starts of P(K_t >= 1) (side='norm') or
    P(L_t >= 1) (side='cond') and check it against the closed bound.

    Either transit requires at least one norm -> cond jump, which occurs
    at rate at most Gamma * A_norm_out while in norm, so the bound uses
    A_norm_out on both sides.  Starts are the full boundary set when it
    has at most boundary_cap members, else a seed-determined subset.
    """
    if side not in ("norm", "cond"):
        raise ValueError("side must be 'norm' or 'cond'")
    if t < 0:
        raise ValueError("horizon t must be nonnegative")
    starts = p.boundary_norm if side == "norm" else p.boundary_cond
    counter = "k_t" if side == "norm" else "l_t"
    if starts.size > boundary_cap:
        picker = np.random.Generator(np.random.Philox(key=seed, counter=1 << 192))
        sel = picker.choice(starts.size, size=boundary_cap, replace=False)
        starts = starts[np.sort(sel)]
    a_norm_out = int(np.max(p.norm_out_degrees))
    bound = -math.expm1(-spec.gamma * a_norm_out * t)
    estimates = []
    errors = []
    for rank, b in enumerate(starts):
        _, _, _, kt, lt, _ = _run_indexed(
            spec, int(b), t, n_samples, seed, p, workers,
            base_index=rank * n_samples)
        hits = (kt >= 1) if side == "norm" else (lt >= 1)
        values = hits.astype(np.float64)
        r = _reduce(values, n_samples, seed)
        estimates.append(r.mean)
        errors.append(r.std_error)
    i_max = int(np.argmax(estimates))
    report = CrossingReport(
        side=side, t=t, counter=counter, bound=bound,
        max_estimate=float(estimates[i_max]),
        std_error_at_max=float(errors[i_max]),
        argmax_start=int(starts[i_max]), n_starts=len(starts),
        n_samples_per_start=n_samples, seed=seed,
        estimates=tuple(float(e) for e in estimates))
    if not report.satisfied:
        raise BoundViolation(
            f"P({counter} >= 1) = {report.max_estimate:.6f} from start "
            f"{report.argmax_start} exceeds {bound:.6f} + 3 se",
            config=report.argmax_start, value=report.max_estimate, bound=bound)
    return report


def factorization_diagnostic(spec: ModelSpec, p: Partition, n0, t: float,
                             n_samples: int, seed: int,
                             workers: int = 1) -> dict:
    """Empirical error of factorizing the constrained expectation into
    (unconstrained diagonal estimate) * P(k_t = 0).

    The factorization is exact only in the limit where trajectories
    decorrelate from the transit counter, so this returns measurements
    without any pass/fail judgement.
    """
    bits = _as_bits(n0)
    if p.contains(bits):
        raise WrongSide("the diagnostic tracks k_t, so start in the normal subspace")
    weights, finals, _, kt, _, _ = _run_indexed(
        spec, bits, t, n_samples, seed, p, workers)
    diag = np.where(finals == np.uint64(bits), weights, 0.0)
    survive = (kt == 0).astype(np.float64)
    constrained = float(np.sum(np.where(kt == 0, diag, 0.0)) / n_samples)
    unconstrained = float(np.sum(diag) / n_samples)
    p_zero = float(np.sum(survive) / n_samples)
    product = unconstrained * p_zero
    denom = abs(constrained) if constrained != 0.0 else 1.0
    return {
        "constrained": constrained,
        "unconstrained": unconstrained,
        "p_k0": p_zero,
        "product": product,
        "relative_error": abs(constrained - product) / denom,
        "n_samples": n_samples,
        "seed": seed,
        "t": t,
    }
