"""Estimator checks against closed forms and dense propagators."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from qcond import eprmc
from qcond.configspace import Configuration, ModelSpec, Partition, TablePotential
from qcond.errors import WrongSide
from qcond.exactthermo import build_hamiltonian
from qcond.models import GroverSpec, IsingChainSpec


def propagator_diag(spec, p, restriction, t, bits):
    hm = build_hamiltonian(spec, p, restriction)
    i = int(np.searchsorted(hm.members, bits))
    assert hm.members[i] == bits
    return float(expm(-t * hm.entries)[i, i])


class TestDiagonalEstimator:
    def test_zero_gamma_is_deterministic(self):
        pot = TablePotential([0.5, -1.0, 2.0, 0.25])
        spec = ModelSpec(n_qubits=2, gamma=0.0, potential=pot)
        r = eprmc.estimate_diagonal(spec, 1, 3.0, 500, seed=2)
        assert r.mean == math.exp(1.0 * 3.0)
        assert r.std_error == 0.0

    def test_zero_horizon_is_identity(self):
        spec = GroverSpec(n_qubits=4, j=1.0, gamma=0.8).model()
        r = eprmc.estimate_diagonal(spec, 5, 0.0, 200, seed=3)
        assert r.mean == 1.0
        assert r.std_error == 0.0

    def test_single_spin_cosh(self):
        # V = 0, N = 1: the diagonal of e^{-Ht} is cosh(Gamma*t).
        spec = ModelSpec(n_qubits=1, gamma=1.0, potential=TablePotential([0.0, 0.0]))
        r = eprmc.estimate_diagonal(spec, 0, 1.0, 100_000, seed=7)
        assert abs(r.mean - math.cosh(1.0)) <= 3.0 * r.std_error
        assert r.std_error <= 0.02 * r.mean

    def test_grover_against_dense_propagator(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        exact = propagator_diag(spec, p, "full", 1.2, 0)
        r = eprmc.estimate_diagonal(spec, 0, 1.2, 100_000, seed=4)
        assert abs(r.mean - exact) <= 3.0 * r.std_error

    def test_result_serialization(self):
        spec = GroverSpec(n_qubits=3, j=1.0, gamma=0.5).model()
        r = eprmc.estimate_diagonal(spec, 1, 0.5, 100, seed=9)
        d = r.to_dict()
        assert set(d) == {"estimate", "std_error", "n_samples", "seed"}
        assert d["n_samples"] == 100 and d["seed"] == 9

    def test_sample_count_validated(self):
        spec = GroverSpec(n_qubits=3, j=1.0, gamma=0.5).model()
        with pytest.raises(ValueError):
            eprmc.estimate_diagonal(spec, 1, 0.5, 0, seed=9)
        with pytest.raises(ValueError):
            eprmc.estimate_diagonal(spec, 1, 0.5, 10, seed=9, workers=0)


class TestConstrainedEstimator:
    def test_no_transit_matches_norm_block(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        exact = propagator_diag(spec, p, "norm", 1.2, 0)
        r = eprmc.estimate_constrained(spec, p, 0, 1.2, "k_t=0", 100_000, seed=4)
        assert abs(r.mean - exact) <= 3.0 * r.std_error

    def test_no_mirror_transit_matches_cond_block(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        exact = propagator_diag(spec, p, "cond", 1.2, 15)
        r = eprmc.estimate_constrained(spec, p, 15, 1.2, "l_t=0", 100_000, seed=4)
        assert abs(r.mean - exact) <= 3.0 * r.std_error

    def test_ising_no_transit_matches_norm_block(self):
        c = IsingChainSpec(n_qubits=5, j=1.0, gamma=0.5, k=0)
        spec, p = c.model(), c.partition()
        start = 0b00101
        assert not p.contains(start)
        exact = propagator_diag(spec, p, "norm", 1.0, start)
        r = eprmc.estimate_constrained(spec, p, start, 1.0, "k_t=0",
                                       100_000, seed=6)
        assert abs(r.mean - exact) <= 3.0 * r.std_error

    def test_complementary_constraints_add_exactly(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        weights, finals, _, kt, _, _ = eprmc._run_indexed(
            spec, 0, 1.2, 5000, 4, p, workers=1)
        hit = np.where(finals == np.uint64(0), weights, 0.0)
        lo = np.where(kt == 0, hit, 0.0)
        hi = np.where(kt >= 1, hit, 0.0)
        assert np.array_equal(lo + hi, hit)

    def test_constraint_side_enforced(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        with pytest.raises(WrongSide):
            eprmc.estimate_constrained(spec, p, 15, 1.0, "k_t=0", 100, seed=1)
        with pytest.raises(WrongSide):
            eprmc.estimate_constrained(spec, p, 0, 1.0, "l_t=0", 100, seed=1)

    def test_constraint_name_validated(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        with pytest.raises(ValueError):
            eprmc.estimate_constrained(g.model(), g.partition(), 0, 1.0,
                                       "m_t=0", 100, seed=1)


class TestTransitCounters:
    def test_handmade_path(self):
        # start in cond {0}; path 0 -> 1 -> 0 -> 2 -> 0 gives one full
        # cond round trip (k=1 needs norm -> cond -> norm; here the cond
        # sojourns are entered from norm twice but only one closes).
        p = Partition(2, [0])
        n = 2
        jumps = ((0.1, Configuration(1, n)), (0.2, Configuration(0, n)),
                 (0.3, Configuration(2, n)), (0.4, Configuration(0, n)))
        traj = eprmc.Trajectory(start=Configuration(0, n), t=1.0, jumps=jumps,
                                log_weight=0.0, final_config=Configuration(0, n))
        c = eprmc.transit_counters(traj, p)
        assert (c.k_t, c.l_t, c.q_t) == (1, 2, 2)

    def test_open_sojourn_counts_nothing(self):
        # start sojourn in norm was not entered from cond, and the final
        # cond sojourn is still open at the horizon: q ticks, k and l don't
        p = Partition(2, [0])
        n = 2
        jumps = ((0.1, Configuration(1, n)), (0.2, Configuration(0, n)))
        traj = eprmc.Trajectory(start=Configuration(2, n), t=1.0, jumps=jumps,
                                log_weight=0.0, final_config=Configuration(0, n))
        c = eprmc.transit_counters(traj, p)
        assert (c.k_t, c.l_t, c.q_t) == (0, 0, 1)

    def test_no_jumps(self):
        p = Partition(2, [0])
        traj = eprmc.Trajectory(start=Configuration(0, 2), t=1.0, jumps=(),
                                log_weight=0.0, final_config=Configuration(0, 2))
        c = eprmc.transit_counters(traj, p)
        assert (c.k_t, c.l_t, c.q_t) == (0, 0, 0)

    def test_dimension_mismatch(self):
        p = Partition(3, [0])
        traj = eprmc.Trajectory(start=Configuration(0, 2), t=1.0, jumps=(),
                                log_weight=0.0, final_config=Configuration(0, 2))
        with pytest.raises(ValueError):
            eprmc.transit_counters(traj, p)


class TestCrossingBounds:
    def test_grover_boundary_within_bound(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        for side in ("norm", "cond"):
            rep = eprmc.crossing_probability_report(
                spec, p, side, 0.5, 20_000, seed=5)
            assert rep.satisfied
            assert 0.0 <= rep.max_estimate <= 1.0
            assert rep.bound == -math.expm1(
                -spec.gamma * float(np.max(p.norm_out_degrees)) * 0.5)

    def test_zero_horizon_crosses_nothing(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        rep = eprmc.crossing_probability_report(
            g.model(), g.partition(), "norm", 0.0, 500, seed=5)
        assert rep.bound == 0.0
        assert rep.max_estimate == 0.0
        assert rep.satisfied

    def test_no_transit_probability_floor(self):
        # complement: P(K_t = 0) >= exp(-Gamma * A_norm_out * t)
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        spec, p = g.model(), g.partition()
        t = 0.8
        _, _, _, kt, _, _ = eprmc._run_indexed(spec, 0, t, 50_000, 8, p, workers=1)
        survive = (kt == 0).astype(float)
        p0 = float(np.mean(survive))
        se = float(np.std(survive, ddof=1) / math.sqrt(survive.size))
        a_out = float(np.max(p.norm_out_degrees))
        assert p0 >= math.exp(-spec.gamma * a_out * t) - 3.0 * se

    def test_side_validated(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        with pytest.raises(ValueError):
            eprmc.crossing_probability_report(g.model(), g.partition(),
                                              "middle", 1.0, 100, seed=1)
        with pytest.raises(ValueError):
            eprmc.crossing_probability_report(g.model(), g.partition(),
                                              "norm", -1.0, 100, seed=1)

    def test_report_serialization(self):
        g = GroverSpec(n_qubits=3, j=1.0, gamma=0.5)
        rep = eprmc.crossing_probability_report(
            g.model(), g.partition(), "norm", 0.3, 2000, seed=2)
        d = rep.to_dict()
        assert d["side"] == "norm" and d["counter"] == "k_t"
        assert d["n_samples_per_start"] == 2000
        assert len(rep.estimates) == rep.n_starts

    def test_boundary_subsampling_is_deterministic(self):
        c = IsingChainSpec(n_qubits=8, j=1.0, gamma=0.3, k=1)
        spec, p = c.model(), c.partition()
        a = eprmc.crossing_probability_report(spec, p, "norm", 0.2, 400,
                                              seed=3, boundary_cap=5)
        b = eprmc.crossing_probability_report(spec, p, "norm", 0.2, 400,
                                              seed=3, boundary_cap=5)
        assert a == b
        assert a.n_starts == 5


class TestFactorizationDiagnostic:
    def test_fields_and_consistency(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        d = eprmc.factorization_diagnostic(g.model(), g.partition(), 0, 1.0,
                                           20_000, seed=10)
        assert set(d) >= {"constrained", "unconstrained", "p_k0", "product",
                          "relative_error", "n_samples", "seed", "t"}
        assert 0.0 <= d["p_k0"] <= 1.0
        assert d["relative_error"] >= 0.0
        assert d["product"] == d["unconstrained"] * d["p_k0"]

    def test_requires_norm_start(self):
        g = GroverSpec(n_qubits=4, j=1.0, gamma=0.6)
        with pytest.raises(WrongSide):
            eprmc.factorization_diagnostic(g.model(), g.partition(), 15, 1.0,
                                           100, seed=1)
