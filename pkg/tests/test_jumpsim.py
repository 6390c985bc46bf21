import math

import numpy as np
import pytest

from mejump import jumpsim, linalg, splitting
from mejump.jumpsim import (
    DELTA_O,
    JumpChain,
    PathBatch,
    RngStream,
    StateKind,
    anti,
    original,
    sample_initial,
    simulate_batch,
    simulate_path,
)
from conftest import decoupled_rotator


@pytest.fixture
def exp_split(exp1):
    return splitting.sign_split(exp1.T, exp1.s)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(123, 4).generator().random(10)
        b = RngStream(123, 4).generator().random(10)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(123, 0).generator().random(10)
        b = RngStream(123, 1).generator().random(10)
        assert not np.array_equal(a, b)


class TestStateIds:
    def test_codes_round_trip(self):
        p = 3
        for code in range(2 * p):
            state = jumpsim.transient_state(code, p)
            assert jumpsim.transient_code(state, p) == code

    def test_labels(self):
        assert original(0).label() == "o0"
        assert anti(2).label() == "a2"
        assert DELTA_O.label() == "DeltaO"

    def test_absorbing_has_no_code(self):
        with pytest.raises(ValueError):
            jumpsim.transient_code(DELTA_O, 3)


class TestSampleInitial:
    def test_reference_always_first_original(self, ref_init):
        for k in range(50):
            state = sample_initial(ref_init, RngStream(9, k))
            assert state == original(0)

    def test_negative_alpha_starts_anti(self):
        init = splitting.initial_split(np.array([-1.0]))
        for k in range(20):
            assert sample_initial(init, RngStream(1, k)) == anti(0)

    def test_balanced_frequencies(self):
        init = splitting.initial_split(np.array([0.5, -0.5]))
        rng = RngStream(77).generator()
        n = 100_000
        hits = sum(
            sample_initial(init, rng).kind is StateKind.ORIGINAL for _ in range(n)
        )
        # binomial 4-sigma band around 1/2
        assert abs(hits / n - 0.5) <= 4.0 * math.sqrt(0.25 / n)


class TestSimulatePath:
    def test_single_state_law(self, exp_split):
        # rate-1 model tilted at 1: exit rate 2, half absorb half terminate
        chain = JumpChain(exp_split, 1.0)
        rng = RngStream(5).generator()
        n = 100_000
        outs = [
            simulate_path(exp_split, 1.0, original(0), rng, _chain=chain)
            for _ in range(n)
        ]
        taus = np.array([o.tau for o in outs])
        signs = np.array([o.sign for o in outs])
        assert all(o.n_jumps == 1 for o in outs[:1000])
        assert taus.mean() == pytest.approx(0.5, abs=4 * taus.std() / math.sqrt(n))
        assert abs((signs == 1).mean() - 0.5) <= 4 * math.sqrt(0.25 / n)
        assert np.all(taus > 0.0)

    def test_reference_first_holding_time(self, ref_split):
        # every diagonal of the doubled block at rate 2 is -3
        chain = JumpChain(ref_split, 2.0)
        rng = RngStream(17).generator()
        n = 50_000
        first = np.array(
            [
                simulate_path(
                    ref_split, 2.0, original(0), rng, collect_trace=True, _chain=chain
                ).trace[0][0]
                for _ in range(n)
            ]
        )
        assert first.mean() == pytest.approx(1.0 / 3.0, abs=4 * first.std() / math.sqrt(n))

    def test_anti_sojourn_cannot_absorb_positive_when_sminus_zero(self, ref_split):
        # s^- = 0: an exit from an anti state can never land DeltaO
        init = splitting.initial_split(np.array([-1.0, 0.0, 0.0]))
        batch = simulate_batch(ref_split, 2.0, init, n_paths=20_000, seed=3)
        from_anti = batch.pre_exit >= 3
        assert from_anti.any()
        assert not np.any(batch.landing[from_anti] == 0)
        # and symmetrically original exits never land DeltaA here
        assert not np.any(batch.landing[~from_anti] == 1)

    def test_trace_consistent(self, ref_split):
        out = simulate_path(ref_split, 2.0, original(0), RngStream(21), collect_trace=True)
        assert len(out.trace) == out.n_jumps
        times = [t for t, _, _ in out.trace]
        assert times == sorted(times)
        assert times[-1] == out.tau
        _, last_from, last_to = out.trace[-1]
        assert last_from == out.pre_exit
        assert last_to == out.landing


class TestSimulateBatch:
    def test_deterministic_repeat(self, ref_split, ref_init):
        a = simulate_batch(ref_split, 2.0, ref_init, n_paths=30_000, seed=42, chunk=7000)
        b = simulate_batch(ref_split, 2.0, ref_init, n_paths=30_000, seed=42, chunk=7000)
        for field in ("tau", "pre_exit", "landing", "sign", "n_jumps"):
            assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_deterministic_across_workers(self, ref_split, ref_init):
        kw = dict(n_paths=50_000, seed=9, chunk=8192)
        a = simulate_batch(ref_split, 2.0, ref_init, workers=1, **kw)
        b = simulate_batch(ref_split, 2.0, ref_init, workers=3, **kw)
        assert np.array_equal(a.tau, b.tau)
        assert np.array_equal(a.pre_exit, b.pre_exit)
        assert np.array_equal(a.landing, b.landing)

    def test_invalid_args(self, ref_split, ref_init):
        with pytest.raises(ValueError):
            simulate_batch(ref_split, 2.0, ref_init, n_paths=0, seed=1)
        with pytest.raises(ValueError):
            simulate_batch(ref_split, 2.0, ref_init, n_paths=10, seed=1, chunk=0)

    def test_preconditions(self, ref_split, ref_init):
        from mejump.errors import LambdaTooSmallError, NotTransientError

        with pytest.raises(LambdaTooSmallError):
            simulate_batch(ref_split, 1.0, ref_init, n_paths=10, seed=1)
        m = decoupled_rotator()
        split = splitting.sign_split(m.T, m.s)
        init = splitting.initial_split(m.alpha)
        with pytest.raises(NotTransientError):
            simulate_batch(split, 0.0, init, n_paths=10, seed=1)
        # above the threshold the rotator simulates fine
        batch = simulate_batch(split, 1.0, init, n_paths=1000, seed=1)
        assert len(batch) == 1000

    def test_occupancy_matches_matrix_exponential(self, ref_split, ref_init):
        x = 0.5
        n = 200_000
        batch = simulate_batch(
            ref_split, 2.0, ref_init, n_paths=n, seed=11, probe_time=x
        )
        oracle = linalg.mat_exp(splitting.doubled_matrix(ref_split, 2.0) * x)[0]
        emp = np.bincount(
            batch.occupancy[batch.occupancy >= 0], minlength=6
        ) / float(n)
        se = np.sqrt(oracle * (1.0 - oracle) / n)
        assert np.all(np.abs(emp - oracle) <= 4.0 * se)
        # tau > x consistency: paths with occupancy recorded are exactly those
        # still alive at x
        assert np.array_equal(batch.occupancy >= 0, batch.tau > x)

    def test_landing_split_given_pre_exit(self, ref_split, ref_init):
        batch = simulate_batch(ref_split, 2.0, ref_init, n_paths=300_000, seed=13)
        prof = splitting.exit_profile(ref_split, 2.0)
        # states 1 and 2 have a positive termination defect at rate 2
        assert (batch.landing == 2).any()
        for i in range(3):
            mask = batch.pre_exit == i
            n = int(mask.sum())
            if n < 1000:
                continue
            frac_o = float((batch.landing[mask] == 0).mean())
            q = prof.qplus[i]
            band = 4.0 * math.sqrt(max(q * (1 - q), 1e-12) / n)
            assert abs(frac_o - q) <= max(band, 1e-9)

    def test_mean_jumps_stable_across_seeds(self, ref_split, ref_init):
        means = [
            simulate_batch(ref_split, 2.0, ref_init, n_paths=50_000, seed=s).n_jumps.mean()
            for s in (1, 2, 3)
        ]
        assert max(means) - min(means) < 0.05
        assert all(np.isfinite(m) for m in means)

    def test_batch_indexing(self, ref_split, ref_init):
        batch = simulate_batch(ref_split, 2.0, ref_init, n_paths=100, seed=5)
        out = batch[7]
        assert out.tau == batch.tau[7]
        assert out.sign in (-1, 0, 1)
        assert len(batch) == 100
        packed = PathBatch.from_outcomes([batch[k] for k in range(100)], p=3, lam=2.0)
        assert np.array_equal(packed.tau, batch.tau)
        assert np.array_equal(packed.pre_exit, batch.pre_exit)
        assert np.array_equal(packed.sign, batch.sign)

    def test_batch_trace(self, ref_split, ref_init):
        batch = simulate_batch(
            ref_split, 2.0, ref_init, n_paths=200, seed=3, chunk=64, collect_trace=True
        )
        path, times, frm, to = batch.trace
        # per-path jump counts and final landing agree with the outcomes
        for k in (0, 63, 64, 199):  # includes chunk boundaries
            rows = path == k
            assert rows.sum() == batch.n_jumps[k]
            assert to[rows][-1] == 6 + batch.landing[k]
            assert times[rows][-1] == batch.tau[k]
            assert np.all(np.diff(times[rows]) > 0)
        # tracing must not perturb the draws
        plain = simulate_batch(ref_split, 2.0, ref_init, n_paths=200, seed=3, chunk=64)
        assert np.array_equal(batch.tau, plain.tau)

    def test_zero_defect_state_never_terminates(self, ref_split, ref_init):
        # row 0 of the reference model has zero termination defect at rate 2
        batch = simulate_batch(ref_split, 2.0, ref_init, n_paths=100_000, seed=29)
        exits_from_0 = (batch.pre_exit % 3) == 0
        assert not np.any(batch.landing[exits_from_0] == 2)
