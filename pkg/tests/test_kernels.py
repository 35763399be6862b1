"""Equivalence and determinism checks for the trajectory kernels.

The compiled and pure batch kernels must be interchangeable at the bit
level: same generator stream, same draw order, same IEEE arithmetic.
Everything downstream (estimator reproducibility, worker independence)
leans on that equivalence, so it is pinned here exhaustively.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from qcond import _ctmc_py, eprmc
from qcond.configspace import Configuration, ModelSpec, Partition, TablePotential
from qcond.models import GroverSpec, IsingChainSpec

try:
    from qcond import _ctmc
except ImportError:
    _ctmc = None

needs_compiled = pytest.mark.skipif(_ctmc is None, reason="compiled kernel not built")


def run_one(mod, seed, i0, n, spec, t, start_bits, p):
    vkind, vu64, vf64 = spec.potential.kernel_params()
    cond = p.cond if p is not None else None
    w = np.empty(n)
    f = np.empty(n, dtype=np.uint64)
    nj = np.empty(n, dtype=np.int64)
    if p is not None:
        kt = np.zeros(n, dtype=np.int64)
        lt = np.zeros(n, dtype=np.int64)
        qt = np.zeros(n, dtype=np.int64)
    else:
        kt = lt = qt = None
    mod.run_batch(seed, i0, n, spec.n_qubits, spec.gamma, t, start_bits,
                  vkind, vu64, vf64, cond, w, f, nj, kt, lt, qt)
    out = (w, f, nj)
    if p is not None:
        out = out + (kt, lt, qt)
    return out


def grover_case():
    g = GroverSpec(n_qubits=5, j=1.0, gamma=0.7)
    return g.model(), g.partition(), 3, 1.5


def ising_case():
    c = IsingChainSpec(n_qubits=6, j=1.0, gamma=0.4, k=1)
    return c.model(), c.partition(), 9, 2.0


def table_case():
    rng = np.random.default_rng(5)
    pot = TablePotential(rng.uniform(-4.0, 4.0, size=16))
    spec = ModelSpec(n_qubits=4, gamma=1.1, potential=pot)
    return spec, Partition(4, [0, 1, 5]), 7, 2.0


ALL_CASES = [grover_case, ising_case, table_case]


class TestStreamIdentity:
    """The in-kernel generator must replay numpy's Philox streams."""

    @needs_compiled
    @pytest.mark.parametrize("seed,index", [
        (42, 0),
        (42, 137),
        (123456789, 2**40 + 5),
        (2**100 + 99, 2**63 - 1),
        (0, 0),
        (7, 3),
    ])
    def test_matches_numpy_generator(self, seed, index):
        gen = np.random.Generator(np.random.Philox(key=seed, counter=index << 128))
        ref = gen.random(1009)
        got = _ctmc.raw_doubles(seed, index, 1009)
        assert np.array_equal(ref, got)

    @needs_compiled
    def test_single_draw(self):
        gen = np.random.Generator(np.random.Philox(key=11, counter=4 << 128))
        assert _ctmc.raw_doubles(11, 4, 1)[0] == gen.random()

    @needs_compiled
    def test_streams_differ_across_indices(self):
        a = _ctmc.raw_doubles(3, 0, 64)
        b = _ctmc.raw_doubles(3, 1, 64)
        assert not np.array_equal(a, b)

    @needs_compiled
    def test_seed_range_validated(self):
        g, p, start, t = grover_case()
        with pytest.raises(ValueError):
            run_one(_ctmc, 1 << 128, 0, 4, g, t, start, p)
        with pytest.raises((ValueError, OverflowError)):
            run_one(_ctmc, -1, 0, 4, g, t, start, p)


class TestBackendBitIdentity:
    """Compiled and pure kernels agree byte for byte."""

    @needs_compiled
    @pytest.mark.parametrize("case", ALL_CASES)
    @pytest.mark.parametrize("track", [True, False])
    def test_outputs_identical(self, case, track):
        spec, p, start, t = case()
        part = p if track else None
        a = run_one(_ctmc, 99, 137, 4000, spec, t, start, part)
        b = run_one(_ctmc_py, 99, 137, 4000, spec, t, start, part)
        for x, y in zip(a, b):
            assert x.tobytes() == y.tobytes()

    @needs_compiled
    def test_offset_slices_concatenate(self):
        spec, p, start, t = grover_case()
        whole = run_one(_ctmc, 5, 0, 600, spec, t, start, p)
        head = run_one(_ctmc, 5, 0, 200, spec, t, start, p)
        tail = run_one(_ctmc, 5, 200, 400, spec, t, start, p)
        for w, h, rest in zip(whole, head, tail):
            assert np.array_equal(w[:200], h)
            assert np.array_equal(w[200:], rest)

    @needs_compiled
    def test_zero_rate_and_zero_horizon(self):
        pot = TablePotential([0.5, -1.0, 2.0, 0.0])
        frozen = ModelSpec(n_qubits=2, gamma=0.0, potential=pot)
        for mod in (_ctmc, _ctmc_py):
            w, f, nj = run_one(mod, 1, 0, 8, frozen, 3.0, 1, None)
            assert np.all(f == 1)
            assert np.all(nj == 0)
            assert np.all(w == math.exp(-pot.value(1) * 3.0))
        live = ModelSpec(n_qubits=2, gamma=0.9, potential=pot)
        for mod in (_ctmc, _ctmc_py):
            w, f, nj = run_one(mod, 1, 0, 8, live, 0.0, 2, None)
            assert np.all(f == 2)
            assert np.all(nj == 0)
            assert np.all(w == 1.0)


class TestSingleTrajectoryConsistency:
    """sample_trajectory replays exactly the kernel's trajectory i."""

    @pytest.mark.parametrize("case", ALL_CASES)
    def test_matches_batch_entry(self, case):
        spec, p, start, t = case()
        seed = 31
        w, f, nj, kt, lt, qt = run_one(_ctmc_py, seed, 0, 50, spec, t, start, p)
        for i in (0, 7, 49):
            stream = np.random.Generator(np.random.Philox(key=seed, counter=i << 128))
            traj = eprmc.sample_trajectory(
                spec, Configuration(start, spec.n_qubits), t, stream)
            assert math.exp(traj.log_weight) == w[i]
            assert traj.final_config.bits == int(f[i])
            assert traj.n_jumps == int(nj[i])
            counters = eprmc.transit_counters(traj, p)
            assert (counters.k_t, counters.l_t, counters.q_t) == \
                (int(kt[i]), int(lt[i]), int(qt[i]))

    def test_final_config_is_left_continuous(self):
        spec, p, start, t = grover_case()
        stream = np.random.Generator(np.random.Philox(key=8, counter=0))
        traj = eprmc.sample_trajectory(spec, Configuration(start, 5), t, stream)
        if traj.jumps:
            assert traj.final_config == traj.jumps[-1][1]
            times = [s for s, _ in traj.jumps]
            assert times == sorted(times)
            assert times[-1] < t
        else:
            assert traj.final_config == traj.start

    def test_input_validation(self):
        spec, _, _, _ = grover_case()
        stream = np.random.default_rng(0)
        with pytest.raises(ValueError):
            eprmc.sample_trajectory(spec, Configuration(0, 3), 1.0, stream)
        with pytest.raises(ValueError):
            eprmc.sample_trajectory(spec, Configuration(0, 5), -1.0, stream)


class TestJumpStatistics:
    """Jump counts are Poisson with rate Gamma*N regardless of V."""

    def test_mean_and_variance(self):
        spec, p, start, t = ising_case()
        n = 100_000
        _, _, nj = run_one(_ctmc_py if _ctmc is None else _ctmc,
                           17, 0, n, spec, t, start, None)
        lam = spec.gamma * spec.n_qubits * t
        mean = float(np.mean(nj))
        se_mean = math.sqrt(lam / n)
        assert abs(mean - lam) <= 4.0 * se_mean
        var = float(np.var(nj, ddof=1))
        se_var = lam * math.sqrt(2.0 / n + 1.0 / (lam * n))
        assert abs(var - lam) <= 4.0 * se_var


class TestDeterminism:
    """Results depend on (model, start, t, n, seed) and nothing else."""

    def test_same_seed_identical(self):
        spec, _, start, t = grover_case()
        a = eprmc.estimate_diagonal(spec, start, t, 2000, seed=12)
        b = eprmc.estimate_diagonal(spec, start, t, 2000, seed=12)
        assert a == b

    def test_different_seed_differs(self):
        spec, _, start, t = grover_case()
        a = eprmc.estimate_diagonal(spec, start, t, 2000, seed=12)
        b = eprmc.estimate_diagonal(spec, start, t, 2000, seed=13)
        assert a.mean != b.mean

    @pytest.mark.parametrize("workers", [2, 4])
    def test_worker_count_invariant(self, workers):
        spec, p, start, t = grover_case()
        base = eprmc.estimate_diagonal(spec, start, t, 20_000, seed=11, workers=1)
        split = eprmc.estimate_diagonal(spec, start, t, 20_000, seed=11,
                                        workers=workers)
        assert base == split
        cbase = eprmc.estimate_constrained(spec, p, 0b00001, t, "k_t=0",
                                           20_000, seed=11, workers=1)
        csplit = eprmc.estimate_constrained(spec, p, 0b00001, t, "k_t=0",
                                            20_000, seed=11, workers=workers)
        assert cbase == csplit

    def test_backend_report(self):
        assert eprmc.kernel_backend() in ("pure", "compiled")

    @needs_compiled
    def test_pure_env_forces_fallback_with_same_numbers(self):
        spec, _, start, t = grover_case()
        here = eprmc.estimate_diagonal(spec, start, t, 3000, seed=21)
        code = (
            "from qcond import eprmc\n"
            "from qcond.models import GroverSpec\n"
            "spec = GroverSpec(n_qubits=5, j=1.0, gamma=0.7).model()\n"
            "r = eprmc.estimate_diagonal(spec, 3, 1.5, 3000, seed=21)\n"
            "print(eprmc.kernel_backend())\n"
            "print(repr(r.mean))\n"
            "print(repr(r.std_error))\n"
        )
        env = dict(os.environ, QCOND_PURE="1")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        backend, mean, se = out.stdout.split()
        assert backend == "pure"
        assert mean == repr(here.mean)
        assert se == repr(here.std_error)
