"""Dense spectral engine: restricted Hamiltonians, free energies,
thermodynamic derivatives, the exact order parameter, and the
diagonal-element / free-energy inequality reports.

All traces run through max-shifted log-sum-exp, so beta * ||E|| up to
1e4 stays finite.  Restricted matrices are built standalone (dimension =
subspace size): the spectrum on the block is the same as for the
embedded form and the dense problems stay as small as possible.

Inequality reports separate two kinds of statement.  The exact ones are
asserted and raise BoundViolation when broken:

* r(n) = <n|e^{-beta H}|n> / <n|e^{-beta H_X}|n> >= 1 on both sides;
* F <= G <= min(F_cond, F_norm), with G the free energy of the direct
  sum exp(-beta F_cond) + exp(-beta F_norm);
* F >= G - ||C||_2, with C the dropped cross-coupling block, whose
  spectral norm is itself bounded by Gamma*sqrt(A_cond_out*A_norm_out).

The width Gamma*min(A_cond_out, A_norm_out) and the matching ratio cap
exp(beta*Gamma*min A_out) hold only up to terms vanishing in the large-N
limit; both are computed and flagged in the reports but never asserted,
since small systems violate them routinely.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .configspace import ModelSpec, Partition, partition_stats
from .errors import BoundViolation, EmptySubspace, InvalidBeta, NonConvergence, TooLarge

DENSE_LIMIT = 1 << 14

RESTRICTIONS = ("full", "cond", "norm")

THERMO_CSV_COLUMNS = (
    "beta", "T", "F_full", "F_cond", "F_norm", "U_full", "U_cond", "U_norm",
    "S_full", "S_cond", "S_norm", "c_full", "c_cond", "c_norm", "p_cond",
)

__all__ = [
    "DENSE_LIMIT",
    "THERMO_CSV_COLUMNS",
    "FreeEnergyBoundsReport",
    "HamiltonianMatrix",
    "MatrixInequalityReport",
    "SpectralCache",
    "ThermoPoint",
    "build_hamiltonian",
    "free_energy",
    "free_energy_bounds_report",
    "ground_energies",
    "matrix_inequality_report",
    "p_cond_exact",
    "spectral_cache",
    "thermo_point",
    "thermo_scan",
    "write_thermo_csv",
]


def _check_beta(beta):
    if not beta > 0 or not np.isfinite(beta):
        raise InvalidBeta(f"beta must be positive and finite, got {beta}")


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Real symmetric matrix of the model (or one of its restrictions)
    in the configuration basis, with the member list it is indexed by."""

    entries: np.ndarray
    members: np.ndarray
    restriction: str

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def operator_norm_bound(self) -> float:
        # cheap symmetric bound: max row sum of absolute values
        return float(np.max(np.sum(np.abs(self.entries), axis=1)))


@dataclass(frozen=True)
class SpectralCache:
    """Eigenvalues (ascending) of one restriction, optional eigenvectors,
    and the member list mapping matrix rows back to configurations."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    members: np.ndarray
    restriction: str

    @property
    def dimension(self) -> int:
        return self.eigenvalues.size

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def log_diag(self, beta: float) -> np.ndarray:
        """log <n|e^{-beta H}|n> for every member n, via the eigenbasis."""
        _check_beta(beta)
        if self.eigenvectors is None:
            raise ValueError("eigenvectors were not kept for this cache")
        with np.errstate(divide="ignore"):
            logu2 = 2.0 * np.log(np.abs(self.eigenvectors))
        return logsumexp(logu2 - beta * self.eigenvalues[None, :], axis=1)


def _members_for(spec: ModelSpec, p: Partition | None, restriction: str) -> np.ndarray:
    if restriction == "full":
        return np.arange(spec.dim, dtype=np.uint64)
    if p is None:
        raise EmptySubspace(f"restriction {restriction!r} needs a partition")
    if spec.n_qubits != p.n_qubits:
        raise ValueError("spec and partition disagree on n_qubits")
    return p.cond if restriction == "cond" else p.norm_members()


def build_hamiltonian(spec: ModelSpec, p: Partition | None, restriction: str,
                      limit: int = DENSE_LIMIT) -> HamiltonianMatrix:
    """Dense H (restriction='full') or a standalone restricted block
    ('cond' / 'norm', cross links to the other side dropped)."""
    if restriction not in RESTRICTIONS:
        raise ValueError(f"restriction must be one of {RESTRICTIONS}")
    if spec.dim > limit:
        raise TooLarge(f"dim 2^{spec.n_qubits} exceeds the dense limit {limit}")
    members = _members_for(spec, p, restriction)
    d = members.size
    index = np.full(spec.dim, -1, dtype=np.int64)
    index[members.astype(np.int64)] = np.arange(d)
    table = spec.potential_table(limit)
    h = np.zeros((d, d))
    h[np.arange(d), np.arange(d)] = table[members.astype(np.int64)]
    for b in range(spec.n_qubits):
        nbr = members ^ np.uint64(1 << b)
        cols = index[nbr.astype(np.int64)]
        keep = cols >= 0
        h[np.arange(d)[keep], cols[keep]] = -spec.gamma
    return HamiltonianMatrix(entries=h, members=members, restriction=restriction)


def spectral_cache(hm: HamiltonianMatrix, vectors: bool = False,
                   residual_rtol: float = 1e-10) -> SpectralCache:
    """Diagonalize, optionally keeping eigenvectors; the reconstruction
    residual per pair must stay below residual_rtol * ||H||."""
    if vectors:
        evals, evecs = np.linalg.eigh(hm.entries)
        scale = max(hm.operator_norm_bound(), 1e-300)
        resid = np.max(np.linalg.norm(hm.entries @ evecs - evecs * evals, axis=0))
        if resid > residual_rtol * scale:
            raise NonConvergence(
                f"eigenpair residual {resid:.3e} exceeds {residual_rtol:.1e} * ||H||")
        return SpectralCache(eigenvalues=evals, eigenvectors=evecs,
                             members=hm.members, restriction=hm.restriction)
    evals = np.linalg.eigvalsh(hm.entries)
    return SpectralCache(eigenvalues=evals, eigenvectors=None,
                         members=hm.members, restriction=hm.restriction)


def _log_z(evals: np.ndarray, beta: float) -> float:
    return float(logsumexp(-beta * evals))


def free_energy(cache: SpectralCache, beta: float) -> float:
    """F = -(1/beta) log sum_i e^{-beta E_i}, max-shifted."""
    _check_beta(beta)
    return -_log_z(cache.eigenvalues, beta) / beta


@dataclass(frozen=True)
class ThermoPoint:
    beta: float
    k_B: float
    free_energy: float
    internal_energy: float
    entropy: float
    specific_heat: float

    @property
    def temperature(self) -> float:
        return 1.0 / (self.k_B * self.beta)


def thermo_point(cache: SpectralCache, beta: float, k_B: float = 1.0) -> ThermoPoint:
    """Canonical U, S, c, F at one temperature from the spectrum alone."""
    _check_beta(beta)
    e = cache.eigenvalues
    shifted = -beta * (e - e[0])
    logw = shifted - logsumexp(shifted)
    w = np.exp(logw)
    u = float(np.sum(w * e))
    var = float(np.sum(w * (e - u) ** 2))
    log_z = float(logsumexp(shifted)) - beta * float(e[0])
    f = -log_z / beta
    s = k_B * (log_z + beta * u)
    if s < 0:
        # round-off only: log Z + beta*U >= 0 holds exactly
        s = 0.0
    return ThermoPoint(beta=beta, k_B=k_B, free_energy=f, internal_energy=u,
                       entropy=s, specific_heat=k_B * beta * beta * var)


def ground_energies(spec: ModelSpec, p: Partition,
                    limit: int = DENSE_LIMIT) -> tuple[float, float, float]:
    """(E, E_cond, E_norm): minimum eigenvalues of the full matrix and of
    the two standalone blocks."""
    out = []
    for restriction in RESTRICTIONS:
        hm = build_hamiltonian(spec, p, restriction, limit=limit)
        out.append(float(np.linalg.eigvalsh(hm.entries)[0]))
    return tuple(out)


def p_cond_exact(spec: ModelSpec, p: Partition, beta: float,
                 limit: int = DENSE_LIMIT,
                 cache: SpectralCache | None = None) -> float:
    """Occupation probability of the condensed subspace,
    sum_{n in cond} <n|rho|n> with rho the full Gibbs state."""
    _check_beta(beta)
    if cache is None:
        cache = spectral_cache(build_hamiltonian(spec, None, "full", limit=limit),
                               vectors=True)
    if cache.eigenvectors is None or cache.restriction != "full":
        raise ValueError("p_cond needs the full restriction with eigenvectors")
    e = cache.eigenvalues
    w = np.exp(-beta * (e - e[0]))
    w /= w.sum()
    rows = p.cond.astype(np.int64)
    mass_cond = np.sum(cache.eigenvectors[rows, :] ** 2, axis=0)
    return float(np.clip(np.sum(w * mass_cond), 0.0, 1.0))


@dataclass(frozen=True)
class MatrixInequalityReport:
    """Diagonal-element ratios r(n) against both of their bounds.

    The lower bound r >= 1 is exact and asserted during construction.
    The cap log r <= beta*Gamma*min(A_out) is a large-N statement; the
    report records its margin and whether it happened to hold.
    """

    beta: float
    gamma: float
    n_checked: int
    log_r_min: float
    log_r_max: float
    argmin: int
    argmax: int
    a_out_min: int
    tdl_log_cap: float
    tdl_cap_holds: bool

    @property
    def r_min(self) -> float:
        return float(np.exp(self.log_r_min))

    @property
    def r_max(self) -> float:
        return float(np.exp(self.log_r_max))

    def to_dict(self) -> dict:
        return {
            "beta": self.beta, "gamma": self.gamma, "n_checked": self.n_checked,
            "r_min": self.r_min, "r_max": self.r_max,
            "log_r_min": self.log_r_min, "log_r_max": self.log_r_max,
            "argmin": self.argmin, "argmax": self.argmax,
            "a_out_min": self.a_out_min, "tdl_log_cap": self.tdl_log_cap,
            "tdl_cap_holds": self.tdl_cap_holds,
        }


def matrix_inequality_report(spec: ModelSpec, p: Partition, beta: float,
                             limit: int = DENSE_LIMIT,
                             rtol: float = 1e-8) -> MatrixInequalityReport:
    """Check r(n) = <n|e^{-beta H}|n> / <n|e^{-beta H_X}|n> >= 1 for every
    configuration (X = the side holding n)."""
    _check_beta(beta)
    full = spectral_cache(build_hamiltonian(spec, p, "full", limit=limit), vectors=True)
    log_full = full.log_diag(beta)
    log_r = np.empty(spec.dim)
    for restriction in ("cond", "norm"):
        side = spectral_cache(build_hamiltonian(spec, p, restriction, limit=limit),
                              vectors=True)
        rows = side.members.astype(np.int64)
        log_r[rows] = log_full[rows] - side.log_diag(beta)
    i_min = int(np.argmin(log_r))
    i_max = int(np.argmax(log_r))
    if log_r[i_min] < -rtol:
        raise BoundViolation(
            f"diagonal ratio below 1 at configuration {i_min}: "
            f"log r = {log_r[i_min]:.3e}",
            config=i_min, value=float(np.exp(log_r[i_min])), bound=1.0)
    stats = partition_stats(spec, p, limit=max(limit, spec.dim))
    a_min = min(stats.a_out_max_cond, stats.a_out_max_norm)
    cap = beta * spec.gamma * a_min
    return MatrixInequalityReport(
        beta=beta, gamma=spec.gamma, n_checked=spec.dim,
        log_r_min=float(log_r[i_min]), log_r_max=float(log_r[i_max]),
        argmin=i_min, argmax=i_max, a_out_min=a_min, tdl_log_cap=cap,
        tdl_cap_holds=bool(log_r[i_max] <= cap + rtol))


@dataclass(frozen=True)
class FreeEnergyBoundsReport:
    """Exact free-energy sandwich plus the large-N width for reference.

    Asserted: F <= G <= min(F_cond, F_norm) and F >= G - ||C||_2, where
    G joins the two restricted traces and C is the dropped cross block.
    Reported only: the large-N form min(F) - Gamma*min(A_out) <= F.
    """

    beta: float
    f_full: float
    f_cond: float
    f_norm: float
    g_joined: float
    cross_norm: float
    cross_norm_cap: float
    tdl_width: float
    tdl_lower_holds: bool

    @property
    def f_min_restricted(self) -> float:
        return min(self.f_cond, self.f_norm)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta, "F_full": self.f_full, "F_cond": self.f_cond,
            "F_norm": self.f_norm, "G_joined": self.g_joined,
            "cross_norm": self.cross_norm, "cross_norm_cap": self.cross_norm_cap,
            "tdl_width": self.tdl_width, "tdl_lower_holds": self.tdl_lower_holds,
        }


def _cross_block(spec: ModelSpec, p: Partition, limit: int) -> np.ndarray:
    cond = p.cond
    norm = p.norm_members(limit)
    index = np.full(spec.dim, -1, dtype=np.int64)
    index[norm.astype(np.int64)] = np.arange(norm.size)
    c = np.zeros((cond.size, norm.size))
    for b in range(spec.n_qubits):
        nbr = cond ^ np.uint64(1 << b)
        cols = index[nbr.astype(np.int64)]
        keep = cols >= 0
        c[np.arange(cond.size)[keep], cols[keep]] = -spec.gamma
    return c


def free_energy_bounds_report(spec: ModelSpec, p: Partition, beta: float,
                              limit: int = DENSE_LIMIT,
                              rtol: float = 1e-8) -> FreeEnergyBoundsReport:
    _check_beta(beta)
    evals = {}
    for restriction in RESTRICTIONS:
        hm = build_hamiltonian(spec, p, restriction, limit=limit)
        evals[restriction] = np.linalg.eigvalsh(hm.entries)
    f_full = -_log_z(evals["full"], beta) / beta
    f_cond = -_log_z(evals["cond"], beta) / beta
    f_norm = -_log_z(evals["norm"], beta) / beta
    g = -float(np.logaddexp(-beta * f_cond, -beta * f_norm)) / beta
    cross = _cross_block(spec, p, limit)
    cross_norm = float(np.linalg.svd(cross, compute_uv=False)[0]) if cross.any() else 0.0
    stats = partition_stats(spec, p, limit=max(limit, spec.dim))
    cap = spec.gamma * float(np.sqrt(stats.a_out_max_cond * stats.a_out_max_norm))
    tol = rtol * max(1.0, abs(f_full), abs(f_cond), abs(f_norm))
    if f_full > g + tol:
        raise BoundViolation(
            f"F = {f_full!r} exceeds the joined restricted bound G = {g!r}",
            value=f_full, bound=g)
    if f_full < g - cross_norm - tol:
        raise BoundViolation(
            f"F = {f_full!r} below G - ||C|| = {g - cross_norm!r}",
            value=f_full, bound=g - cross_norm)
    a_min = min(stats.a_out_max_cond, stats.a_out_max_norm)
    width = spec.gamma * a_min
    return FreeEnergyBoundsReport(
        beta=beta, f_full=f_full, f_cond=f_cond, f_norm=f_norm, g_joined=g,
        cross_norm=cross_norm, cross_norm_cap=cap, tdl_width=width,
        tdl_lower_holds=bool(f_full >= min(f_cond, f_norm) - width - tol))


def thermo_scan(spec: ModelSpec, p: Partition, betas, k_B: float = 1.0,
                limit: int = DENSE_LIMIT) -> list[dict]:
    """Full / cond / norm thermodynamics plus p_cond on a beta grid.

    Diagonalizes each restriction once and reuses the spectra across the
    whole grid; rows follow THERMO_CSV_COLUMNS.
    """
    caches = {}
    for restriction in RESTRICTIONS:
        hm = build_hamiltonian(spec, p, restriction, limit=limit)
        caches[restriction] = spectral_cache(hm, vectors=(restriction == "full"))
    rows = []
    for beta in betas:
        row = {"beta": float(beta), "T": 1.0 / (k_B * float(beta))}
        for restriction in RESTRICTIONS:
            tp = thermo_point(caches[restriction], float(beta), k_B)
            tag = restriction
            row[f"F_{tag}"] = tp.free_energy
            row[f"U_{tag}"] = tp.internal_energy
            row[f"S_{tag}"] = tp.entropy
            row[f"c_{tag}"] = tp.specific_heat
        row["p_cond"] = p_cond_exact(spec, p, float(beta), cache=caches["full"])
        rows.append(row)
    return rows


def write_thermo_csv(fileobj, rows) -> None:
    writer = csv.DictWriter(fileobj, fieldnames=THERMO_CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(row[k]) for k in THERMO_CSV_COLUMNS})
