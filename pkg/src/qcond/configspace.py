"""Configuration space of an N-qubit system and its hopping graph.

Configurations are the eigenstates of the diagonal (potential) operator,
encoded as unsigned integers with bit i holding the state of qubit i, so
the space has dim = 2^N members.  The off-diagonal operator is the fixed
single-flip hopping (matrix element -1 on every edge of the N-cube), which
gives every configuration the constant degree A(n) = N.

A Partition splits the space into a condensed subspace (explicit member
list) and its complement.  Boundary sets and cross-link statistics are
derived from the condensed members alone, so they stay cheap even when
2^N is far larger than the condensed dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import EmptySubspace, SignProblem, TooLarge

# Exhaustive enumeration cap; MC-only workflows may exceed it, exact ones not.
ENUM_LIMIT = 1 << 24

# Hard cap from the unsigned-64-bit configuration encoding.
MAX_QUBITS = 63

SINGLE_FLIP = "single_flip"

__all__ = [
    "ENUM_LIMIT",
    "Configuration",
    "ModelSpec",
    "Partition",
    "PartitionStats",
    "TablePotential",
    "hop_neighbors",
    "split_degree",
    "partition_from_threshold",
    "partition_stats",
    "stationary_measure",
]


@dataclass(frozen=True)
class Configuration:
    """One basis state: an N-bit pattern, bit i = state of qubit i."""

    bits: int
    n_qubits: int

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise TooLarge(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        if not 0 <= self.bits < (1 << self.n_qubits):
            raise ValueError(f"bits {self.bits} out of range for {self.n_qubits} qubits")

    def flip(self, i: int) -> "Configuration":
        if not 0 <= i < self.n_qubits:
            raise ValueError(f"flip index {i} out of range")
        return Configuration(self.bits ^ (1 << i), self.n_qubits)

    def hamming(self, other: "Configuration") -> int:
        return (self.bits ^ other.bits).bit_count()

    def __str__(self):
        return format(self.bits, f"0{self.n_qubits}b")


class TablePotential:
    """Potential given as an explicit table over all 2^N configurations."""

    kind = "table"

    def __init__(self, values):
        self._values = np.ascontiguousarray(values, dtype=np.float64)
        if self._values.ndim != 1 or self._values.size < 2:
            raise ValueError("potential table must be a 1-D array of size 2^N")
        n = int(self._values.size).bit_length() - 1
        if (1 << n) != self._values.size:
            raise ValueError("potential table size must be a power of 2")
        if not np.all(np.isfinite(self._values)):
            raise ValueError("potential values must be finite")
        self.n_qubits = n
        self._values.flags.writeable = False

    def value(self, bits: int) -> float:
        return float(self._values[bits])

    def table(self) -> np.ndarray:
        return self._values

    def kernel_params(self):
        # (kind id, uint64 data, float64 data) consumed by the kernels
        return 0, np.empty(0, dtype=np.uint64), self._values

    def describe(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.n_qubits}


@dataclass(frozen=True)
class ModelSpec:
    """A concrete Hamiltonian instance: diagonal potential plus gamma times
    the single-flip hopping (off-diagonal elements all equal to -gamma).

    gamma < 0 would make the off-diagonal elements positive and leave the
    sign-problem-free class, so it is rejected at construction.
    """

    n_qubits: int
    gamma: float
    potential: object
    hopping: str = SINGLE_FLIP

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise TooLarge(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        if self.hopping != SINGLE_FLIP:
            raise ValueError(f"unsupported hopping rule {self.hopping!r}")
        if not np.isfinite(self.gamma):
            raise ValueError("gamma must be finite")
        if self.gamma < 0:
            raise SignProblem("gamma < 0 gives positive off-diagonal elements")
        pn = getattr(self.potential, "n_qubits", self.n_qubits)
        if pn != self.n_qubits:
            raise ValueError("potential built for a different qubit count")

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def degree(self, bits: int) -> int:
        # single-flip hopping: constant degree A(n) = N
        return self.n_qubits

    def potential_value(self, bits: int) -> float:
        return self.potential.value(bits)

    def potential_table(self, limit: int = ENUM_LIMIT) -> np.ndarray:
        if self.dim > limit:
            raise TooLarge(f"dim 2^{self.n_qubits} exceeds the enumeration limit {limit}")
        return self.potential.table()

    def describe(self) -> dict:
        d = dict(self.potential.describe())
        d.update(n_qubits=self.n_qubits, gamma=self.gamma, hopping=self.hopping)
        return d


def hop_neighbors(c: Configuration, spec: ModelSpec | None = None) -> list[Configuration]:
    """All N configurations one flip away, in ascending flipped-bit order."""
    n = c.n_qubits if spec is None else spec.n_qubits
    if spec is not None and n != c.n_qubits:
        raise ValueError("configuration and spec disagree on n_qubits")
    return [Configuration(c.bits ^ (1 << i), n) for i in range(n)]


class Partition:
    """Condensed / normal split of the configuration space.

    Holds the condensed member list explicitly (sorted, immutable); the
    normal subspace is the complement.  Boundary sets are materialized
    lazily and cached: out-degree queries dominate the MC and statistics
    workloads, and every boundary quantity follows from the condensed
    members and their flip neighborhoods alone.
    """

    def __init__(self, n_qubits: int, cond_members):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise TooLarge(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        cond = np.unique(np.asarray(list(cond_members), dtype=np.uint64))
        dim = 1 << n_qubits
        if cond.size == 0:
            raise EmptySubspace("condensed subspace is empty")
        if cond.size >= dim:
            raise EmptySubspace("normal subspace is empty")
        if cond[-1] >= dim:
            raise ValueError("condensed member out of range for n_qubits")
        cond.flags.writeable = False
        self.n_qubits = n_qubits
        self.cond = cond

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def dim_cond(self) -> int:
        return int(self.cond.size)

    @property
    def dim_norm(self) -> int:
        return self.dim - self.dim_cond

    def contains(self, bits) -> bool:
        """True when the configuration lies in the condensed subspace."""
        i = np.searchsorted(self.cond, np.uint64(bits))
        return bool(i < self.cond.size and self.cond[i] == np.uint64(bits))

    def norm_members(self, limit: int = ENUM_LIMIT) -> np.ndarray:
        if self.dim > limit:
            raise TooLarge(f"dim 2^{self.n_qubits} exceeds the enumeration limit {limit}")
        mask = np.ones(self.dim, dtype=bool)
        mask[self.cond.astype(np.int64)] = False
        return np.nonzero(mask)[0].astype(np.uint64)

    @cached_property
    def _cross(self):
        """Cross links as (condensed endpoint, normal endpoint) arrays."""
        bits = (np.uint64(1) << np.arange(self.n_qubits, dtype=np.uint64))
        nbr = self.cond[:, None] ^ bits[None, :]
        inside = np.isin(nbr, self.cond)
        src = np.broadcast_to(self.cond[:, None], nbr.shape)[~inside]
        dst = nbr[~inside]
        return src, dst

    @cached_property
    def cond_out_degrees(self) -> np.ndarray:
        """Out-degree of every condensed member (aligned with .cond)."""
        src, _ = self._cross
        deg = np.zeros(self.cond.size, dtype=np.int64)
        idx = np.searchsorted(self.cond, src)
        np.add.at(deg, idx, 1)
        return deg

    @cached_property
    def boundary_cond(self) -> np.ndarray:
        """Condensed configurations with at least one flip into normal."""
        return self.cond[self.cond_out_degrees > 0]

    @cached_property
    def _norm_boundary(self):
        _, dst = self._cross
        members, counts = np.unique(dst, return_counts=True)
        return members, counts

    @cached_property
    def boundary_norm(self) -> np.ndarray:
        """Normal configurations with at least one flip into condensed."""
        return self._norm_boundary[0]

    @cached_property
    def norm_out_degrees(self) -> np.ndarray:
        """Out-degree of every normal-boundary member (aligned with
        .boundary_norm); all other normal configurations have 0."""
        return self._norm_boundary[1]

    def out_degree(self, bits) -> int:
        n = np.uint64(bits)
        side = self.contains(n)
        count = 0
        for i in range(self.n_qubits):
            if self.contains(n ^ (np.uint64(1) << np.uint64(i))) != side:
                count += 1
        return count

    def to_json(self) -> str:
        return json.dumps({"n_qubits": self.n_qubits, "cond": [int(c) for c in self.cond]})

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        d = json.loads(text)
        return cls(int(d["n_qubits"]), d["cond"])


@dataclass(frozen=True)
class PartitionStats:
    """Cross-link statistics of a partition.

    The link-count identity  mean_out_cond * |boundary_cond| =
    mean_out_norm * |boundary_norm| = cross_links  holds exactly (both
    sides count the same cross-link set), hence the Fraction-valued means.
    alpha_cond = |boundary_cond| / dim_cond is a diagnostic only: the
    regular-tree picture behind it is an approximation, so it is reported
    and never asserted against a threshold.
    """

    a_out_max_cond: int
    a_out_max_norm: int
    a_out_mean_cond: Fraction
    a_out_mean_norm: Fraction
    boundary_cond_size: int
    boundary_norm_size: int
    cross_links: int
    alpha_cond: Fraction

    def __post_init__(self):
        if self.a_out_mean_cond * self.boundary_cond_size != self.cross_links:
            raise ValueError("condensed-side link count identity violated")
        if self.a_out_mean_norm * self.boundary_norm_size != self.cross_links:
            raise ValueError("normal-side link count identity violated")

    @classmethod
    def from_out_degrees(cls, cond_out_degrees, norm_out_degrees,
                         dim_cond: int | None = None) -> "PartitionStats":
        """Build the statistics from explicit boundary out-degree lists
        (each entry one boundary configuration, value its out-degree)."""
        cd = [int(x) for x in cond_out_degrees]
        nd = [int(x) for x in norm_out_degrees]
        if any(x <= 0 for x in cd) or any(x <= 0 for x in nd):
            raise ValueError("boundary out-degrees must be positive")
        total_c, total_n = sum(cd), sum(nd)
        if total_c != total_n:
            raise ValueError("the two sides must count the same cross links")
        if dim_cond is None:
            dim_cond = len(cd)
        return cls(
            a_out_max_cond=max(cd),
            a_out_max_norm=max(nd),
            a_out_mean_cond=Fraction(total_c, len(cd)),
            a_out_mean_norm=Fraction(total_n, len(nd)),
            boundary_cond_size=len(cd),
            boundary_norm_size=len(nd),
            cross_links=total_c,
            alpha_cond=Fraction(len(cd), dim_cond),
        )

    def to_dict(self) -> dict:
        return {
            "a_out_max_cond": self.a_out_max_cond,
            "a_out_max_norm": self.a_out_max_norm,
            "a_out_mean_cond": [self.a_out_mean_cond.numerator,
                                self.a_out_mean_cond.denominator],
            "a_out_mean_norm": [self.a_out_mean_norm.numerator,
                                self.a_out_mean_norm.denominator],
            "boundary_cond_size": self.boundary_cond_size,
            "boundary_norm_size": self.boundary_norm_size,
            "cross_links": self.cross_links,
            "alpha_cond": [self.alpha_cond.numerator, self.alpha_cond.denominator],
            "identity_holds": True,
        }


def split_degree(c: Configuration, p: Partition) -> tuple[int, int]:
    """(a_in, a_out) for one configuration: flips staying on its side of
    the partition versus flips crossing to the other side."""
    if c.n_qubits != p.n_qubits:
        raise ValueError("configuration and partition disagree on n_qubits")
    a_out = p.out_degree(c.bits)
    return c.n_qubits - a_out, a_out


def partition_from_threshold(spec: ModelSpec, max_v_cond: float,
                             limit: int = ENUM_LIMIT) -> Partition:
    """Condensed subspace = all configurations with V(n) <= max_v_cond
    (ties at the threshold go to the condensed side)."""
    v = spec.potential_table(limit)
    cond = np.nonzero(v <= max_v_cond)[0]
    if cond.size == 0:
        raise EmptySubspace("no configuration at or below the threshold")
    if cond.size == v.size:
        raise EmptySubspace("every configuration is at or below the threshold")
    return Partition(spec.n_qubits, cond)


def partition_stats(spec: ModelSpec, p: Partition,
                    limit: int = ENUM_LIMIT) -> PartitionStats:
    """Exact (integer / rational) cross-link statistics of a partition."""
    if spec.n_qubits != p.n_qubits:
        raise ValueError("spec and partition disagree on n_qubits")
    if spec.dim > limit:
        raise TooLarge(f"dim 2^{spec.n_qubits} exceeds the enumeration limit {limit}")
    cond_deg = p.cond_out_degrees
    cond_deg = cond_deg[cond_deg > 0]
    norm_deg = p.norm_out_degrees
    if cond_deg.size == 0:
        # no cross links can only happen for a disconnected hopping graph,
        # which the single-flip rule excludes
        raise EmptySubspace("partition has no cross links")
    return PartitionStats.from_out_degrees(cond_deg.tolist(), norm_deg.tolist(),
                                           dim_cond=p.dim_cond)


def stationary_measure(spec: ModelSpec, limit: int = ENUM_LIMIT) -> dict[int, float]:
    """Invariant measure of the jump chain: pi_n = A(n) / sum A.

    The single-flip graph is connected and has constant degree N, so the
    measure is uniform, 1 / 2^N per configuration.
    """
    if spec.dim > limit:
        raise TooLarge(f"dim 2^{spec.n_qubits} exceeds the enumeration limit {limit}")
    total = spec.dim * spec.n_qubits
    return {n: spec.degree(n) / total for n in range(spec.dim)}
