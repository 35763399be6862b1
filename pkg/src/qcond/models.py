"""Built-in models and their closed-form reference results.

Two families:

* Grover: V(n) = -JN on a small set of marked configurations, 0 elsewhere.
  With several marked configurations, pairwise Hamming distance >= 3 is
  required so that no unmarked configuration neighbors two of them.  The
  single-target model is exactly solvable and all its thermodynamics is
  available in closed form here.

* Ising chain: V(n) = -JN + 2J q(n), where q(n) counts domain walls read
  along the bit string (adjacent pairs i, i+1 for i < N-1).  This counting
  reproduces the level degeneracy D(q) = 2 C(N-1, q) exactly; the energy
  is anchored so the two aligned states sit at -JN.

Model files use a flat ``key = value`` text format, see
:func:`parse_model_config`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .configspace import MAX_QUBITS, ModelSpec, Partition
from .errors import EmptySubspace, InvalidBeta, OutOfRange

__all__ = [
    "GroverPotential",
    "GroverSpec",
    "IsingChainSpec",
    "IsingPotential",
    "grover_critical_gamma",
    "grover_free_energies",
    "grover_thermo",
    "ising_cut_count",
    "ising_level",
    "ising_partition",
    "load_model_file",
    "parse_model_config",
]

# kernel_params kind tags shared with the sampling kernels
KIND_TABLE = 0
KIND_MARKED = 1
KIND_CHAIN = 2


def _log2cosh(x: float) -> float:
    # log(2 cosh x) without overflow for large |x|
    return np.logaddexp(x, -x)


class GroverPotential:
    """V(n) = value on the marked set, 0 elsewhere (value = -J*N)."""

    kind = "grover"

    def __init__(self, n_qubits: int, j: float, targets):
        if j <= 0:
            raise ValueError("coupling J must be positive")
        t = np.unique(np.asarray(list(targets), dtype=np.uint64))
        if t.size == 0:
            raise ValueError("at least one marked configuration is required")
        if t[-1] >= (1 << n_qubits):
            raise ValueError("marked configuration out of range")
        t.flags.writeable = False
        self.n_qubits = n_qubits
        self.j = float(j)
        self.targets = t
        self.target_value = -self.j * n_qubits

    def value(self, bits: int) -> float:
        i = np.searchsorted(self.targets, np.uint64(bits))
        if i < self.targets.size and self.targets[i] == np.uint64(bits):
            return self.target_value
        return 0.0

    def table(self) -> np.ndarray:
        v = np.zeros(1 << self.n_qubits)
        v[self.targets.astype(np.int64)] = self.target_value
        return v

    def kernel_params(self):
        return KIND_MARKED, self.targets, np.array([self.target_value])

    def describe(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.n_qubits, "j": self.j,
                "targets": [int(t) for t in self.targets]}


class IsingPotential:
    """V(n) = -JN + 2J q(n) with q the adjacent-pair domain-wall count."""

    kind = "ising"

    def __init__(self, n_qubits: int, j: float):
        if n_qubits < 2:
            raise ValueError("the chain needs at least 2 qubits")
        if j <= 0:
            raise ValueError("coupling J must be positive")
        self.n_qubits = n_qubits
        self.j = float(j)
        self._mask = (1 << (n_qubits - 1)) - 1

    def cut_count(self, bits: int) -> int:
        return ((bits ^ (bits >> 1)) & self._mask).bit_count()

    def value(self, bits: int) -> float:
        return -self.j * self.n_qubits + 2.0 * self.j * self.cut_count(bits)

    def table(self) -> np.ndarray:
        q = _vector_cut_counts(self.n_qubits)
        return -self.j * self.n_qubits + 2.0 * self.j * q

    def kernel_params(self):
        return (KIND_CHAIN, np.array([self._mask], dtype=np.uint64),
                np.array([-self.j * self.n_qubits, 2.0 * self.j]))

    def describe(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.n_qubits, "j": self.j}


def ising_cut_count(bits: int, n_qubits: int) -> int:
    """Domain walls of the bit string: adjacent pairs (i, i+1), i < N-1."""
    return ((bits ^ (bits >> 1)) & ((1 << (n_qubits - 1)) - 1)).bit_count()


def _vector_cut_counts(n_qubits: int) -> np.ndarray:
    """Cut count of every configuration 0 .. 2^N - 1 at once."""
    n = np.arange(1 << n_qubits, dtype=np.uint64)
    walls = (n ^ (n >> np.uint64(1))) & np.uint64((1 << (n_qubits - 1)) - 1)
    q = np.zeros(n.size, dtype=np.int64)
    while walls.any():
        q += (walls & np.uint64(1)).astype(np.int64)
        walls >>= np.uint64(1)
    return q


def _pairwise_hamming_ok(targets, minimum=3) -> bool:
    t = [int(x) for x in targets]
    return all((a ^ b).bit_count() >= minimum
               for i, a in enumerate(t) for b in t[i + 1:])


@dataclass(frozen=True)
class GroverSpec:
    """Marked-configuration model; the default marks the all-ones pattern.

    With more than one marked configuration every pair must differ in at
    least 3 bits, which keeps every unmarked configuration adjacent to at
    most one marked one.
    """

    n_qubits: int
    j: float
    gamma: float
    targets: tuple = ()

    def __post_init__(self):
        if self.j <= 0:
            raise ValueError("coupling J must be positive")
        if not self.targets:
            object.__setattr__(self, "targets", ((1 << self.n_qubits) - 1,))
        else:
            object.__setattr__(self, "targets",
                               tuple(sorted(int(t) for t in set(self.targets))))
        if len(self.targets) > 1 and not _pairwise_hamming_ok(self.targets):
            raise ValueError("marked configurations must be pairwise at Hamming distance >= 3")

    def model(self) -> ModelSpec:
        pot = GroverPotential(self.n_qubits, self.j, self.targets)
        return ModelSpec(n_qubits=self.n_qubits, gamma=self.gamma, potential=pot)

    def partition(self) -> Partition:
        return Partition(self.n_qubits, self.targets)

    def describe(self) -> dict:
        return {"model": "grover", "n_qubits": self.n_qubits, "j": self.j,
                "gamma": self.gamma, "targets": list(self.targets)}


@dataclass(frozen=True)
class IsingChainSpec:
    """Chain model with the cut-count threshold partition q(n) <= k."""

    n_qubits: int
    j: float
    gamma: float
    k: int = 0

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("the chain needs at least 2 qubits")
        if self.j <= 0:
            raise ValueError("coupling J must be positive")
        if not 0 <= self.k <= self.n_qubits - 2:
            raise OutOfRange(f"threshold k must be in [0, {self.n_qubits - 2}], got {self.k}")

    def model(self) -> ModelSpec:
        pot = IsingPotential(self.n_qubits, self.j)
        return ModelSpec(n_qubits=self.n_qubits, gamma=self.gamma, potential=pot)

    def partition(self) -> Partition:
        return ising_partition(self)

    def describe(self) -> dict:
        return {"model": "ising", "n_qubits": self.n_qubits, "j": self.j,
                "gamma": self.gamma, "k": self.k}


def grover_free_energies(N: int, J: float, gamma: float, beta: float):
    """Restricted free energies of the single-target model.

    F_cond = -JN exactly (the lone level of the 1-dim condensed block);
    F_norm = -(N/beta) log(2 cosh(beta*Gamma)), the free-spin result,
    exact up to the omitted target state.
    """
    if beta <= 0:
        raise InvalidBeta(f"beta must be positive, got {beta}")
    f_cond = -J * N
    f_norm = -(N / beta) * _log2cosh(beta * gamma)
    return f_cond, f_norm


def grover_critical_gamma(J: float, T: float, k_B: float = 1.0):
    """Critical hopping strength at temperature T, or None when no
    condensed phase exists there (k_B T > J / log 2).  T = 0 returns J.
    """
    if J <= 0:
        raise ValueError("coupling J must be positive")
    if T < 0:
        raise ValueError("temperature must be nonnegative")
    if T == 0:
        return J
    kt = k_B * T
    if kt > J / math.log(2):
        return None
    radicand = 0.25 - math.exp(-2.0 * J / kt)
    if radicand < 0:
        # round-off just below the terminal temperature
        if radicand < -1e-12:
            return None
        radicand = 0.0
    return J + kt * math.log(0.5 + math.sqrt(radicand))


@dataclass(frozen=True)
class GroverThermo:
    u_cond: float
    u_norm: float
    s_cond: float
    s_norm: float
    c_cond: float
    c_norm: float


def grover_thermo(N: int, J: float, gamma: float, beta: float,
                  k_B: float = 1.0) -> GroverThermo:
    """Closed-form restricted thermodynamics of the single-target model.

    U_cond = -JN, S_cond = c_cond = 0 (1-dim block); the normal block is
    N free spins: U_norm = -Gamma N tanh(beta Gamma), S_norm =
    N k_B [log(2 cosh beta Gamma) - beta Gamma tanh(beta Gamma)], and
    c_norm = dU_norm/dT = N k_B (beta Gamma / cosh(beta Gamma))^2.
    """
    if beta <= 0:
        raise InvalidBeta(f"beta must be positive, got {beta}")
    x = beta * gamma
    th = math.tanh(x)
    u_norm = -gamma * N * th
    s_norm = N * k_B * (_log2cosh(x) - x * th)
    # sech via exp to stay finite for large x
    sech = 2.0 / (math.exp(x) + math.exp(-x)) if abs(x) < 700 else 0.0
    c_norm = N * k_B * (x * sech) ** 2
    return GroverThermo(u_cond=-J * N, u_norm=u_norm, s_cond=0.0,
                        s_norm=s_norm, c_cond=0.0, c_norm=c_norm)


def ising_level(N: int, q: int):
    """(V_q, D_q) of the chain in units of the coupling: V_q = -N + 2q,
    D_q = 2 C(N-1, q), with sum_q D_q = 2^N."""
    if N < 2:
        raise OutOfRange(f"the chain needs at least 2 qubits, got N={N}")
    if not 0 <= q <= N - 1:
        raise OutOfRange(f"cut count must be in [0, {N - 1}], got {q}")
    return float(-N + 2 * q), 2 * comb(N - 1, q)


def ising_level_energy(N: int, q: int, j: float) -> float:
    return j * ising_level(N, q)[0]


def ising_partition(spec: IsingChainSpec) -> Partition:
    """Threshold partition of the chain: cond = { n : q(n) <= k }."""
    q = _vector_cut_counts(spec.n_qubits)
    cond = np.nonzero(q <= spec.k)[0]
    if cond.size == 0 or cond.size == q.size:
        raise EmptySubspace("threshold k leaves one side empty")
    return Partition(spec.n_qubits, cond)


_MODEL_KEYS = {
    "grover": {"model", "n", "j", "gamma", "targets"},
    "ising": {"model", "n", "j", "gamma", "k"},
}


def parse_model_config(text: str, n_override: int | None = None):
    """Parse a ``key = value`` model file into a GroverSpec or IsingChainSpec.

    Keys: ``model`` (grover | ising), ``n``, ``j``, ``gamma``, and either
    ``targets`` (comma-separated integers, grover only, optional) or ``k``
    (ising only, optional, default 0).  ``#`` starts a comment.
    n_override replaces the file's size before validation.
    """
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        if key in entries:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = val.strip()

    kind = entries.get("model", "").lower()
    if kind not in _MODEL_KEYS:
        raise ValueError(f"model must be one of {sorted(_MODEL_KEYS)}, got {kind!r}")
    unknown = set(entries) - _MODEL_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown keys for model {kind!r}: {sorted(unknown)}")
    for required in ("n", "j", "gamma"):
        if required not in entries:
            raise ValueError(f"missing required key {required!r}")

    n = int(entries["n"]) if n_override is None else int(n_override)
    j = float(entries["j"])
    gamma = float(entries["gamma"])
    if kind == "grover":
        targets = ()
        if "targets" in entries:
            targets = tuple(int(t.strip(), 0) for t in entries["targets"].split(","))
        return GroverSpec(n_qubits=n, j=j, gamma=gamma, targets=targets)
    return IsingChainSpec(n_qubits=n, j=j, gamma=gamma,
                          k=int(entries.get("k", 0)))


def load_model_file(path, n_override: int | None = None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_config(fh.read(), n_override=n_override)
