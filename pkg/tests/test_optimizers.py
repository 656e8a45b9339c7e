import math

import numpy as np
import pytest

from floorpac.datasets import BatchMode, BatchSpec, IndexSplit, sample_prior_indices, synth_blobs
from floorpac.models import ModelArch, ModelObjective, QuadraticObjective, ZeroObjective, init_params
from floorpac.optimizers import (STEP_COLUMNS, OptState, Schedule, StepError, TrajectoryLog, run, step_fgd,
                                 step_rgd, step_sgld)


@pytest.fixture(scope="module")
def blob_problem():
    data = synth_blobs(400, 2, 3, 3.0, 0)
    obj = ModelObjective(ModelArch.linear(2, 3), data)
    split = sample_prior_indices(400, 200, 1)
    return obj, split, init_params(obj.arch, 2)


class TestSchedule:
    def test_constant(self):
        s = Schedule.constant(4, 0.1, eps=0.01)
        assert s.gamma.tolist() == [0.1] * 4 and s.eps.tolist() == [0.01] * 4 and s.sigma is None

    def test_step_decay(self):
        s = Schedule.step_decay(7, 1.0, every=3, factor=0.5)
        assert s.gamma.tolist() == [1, 1, 1, 0.5, 0.5, 0.5, 0.25]

    def test_inverse_t(self):
        s = Schedule.inverse_t(4, 2.0)
        assert s.gamma.tolist() == pytest.approx([2, 1, 2 / 3, 0.5])

    @pytest.mark.parametrize("kw", [dict(T=3, gamma=[0.1, 0.1]), dict(T=2, gamma=-0.1), dict(T=2, gamma=0.1, eps=0),
                                    dict(T=2, gamma=0.1, sigma=[1, -1]), dict(T=2, gamma=0.1, beta=0),
                                    dict(T=-1, gamma=0.1), dict(T=2, gamma=math.nan)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            Schedule(**kw)

    def test_zero_gamma_allowed(self):
        assert Schedule.constant(3, 0.0, sigma=1.0).gamma.sum() == 0

    def test_missing_field(self):
        with pytest.raises(ValueError, match="eps"):
            Schedule.constant(2, 0.1).need("eps")


class TestFloored:
    def test_hand_trace(self):
        # S gradient at 0 is 0.77, J = {0} gradient 0.30; gamma (gS - gJ)/eps = 2.35 floors to 2
        obj = QuadraticObjective([[-0.30], [-1.24]])
        split = IndexSplit.from_prior([0], 2)
        sched = Schedule.constant(2, 1.0, eps=0.2)
        state, rec = step_fgd(OptState.start([0.0]), obj, split, sched, 1)
        assert state.w[0] == pytest.approx(-0.70, abs=1e-15)
        assert rec["lattice_sq"] == 4
        assert rec["floor_residual_max"] == pytest.approx(0.07, abs=1e-15)
        assert rec["grad_diff_sq"] == pytest.approx(0.47**2, abs=1e-15)
        assert rec["grad_diff_sq_weighted_eps"] == pytest.approx(0.47**2 / 0.04, rel=1e-14)
        state, _ = step_fgd(state, obj, split, sched, 2)
        assert state.w[0] == pytest.approx(-0.70, abs=1e-15)

    def test_residual_below_eps(self, blob_problem):
        obj, split, w0 = blob_problem
        log = run("fgd", obj, Schedule.constant(50, 0.5, eps=0.05), split, w0=w0)
        assert np.all(log.column("floor_residual_max") < 0.05)

    def test_tiny_eps_tracks_gd(self, blob_problem):
        obj, split, w0 = blob_problem
        sched = Schedule.constant(100, 0.5, eps=1e-9)
        f = run("fgd", obj, sched, split, w0=w0)
        g = run("gd", obj, sched, split, w0=w0)
        assert np.max(np.abs(f.final_params - g.final_params)) <= 1e-6

    def test_momentum_tracks_gd(self, blob_problem):
        obj, split, w0 = blob_problem
        sched = Schedule.constant(60, 0.3, eps=1e-9, alpha=0.5)
        f = run("fgd", obj, sched, split, w0=w0)
        g = run("gd", obj, sched, split, w0=w0)
        assert np.max(np.abs(f.final_params - g.final_params)) <= 1e-6

    def test_deterministic(self, blob_problem):
        obj, split, w0 = blob_problem
        sched = Schedule.constant(30, 0.5, eps=0.05)
        a = run("fsgd", obj, sched, split, w0=w0, seed=4, batch=BatchSpec(32))
        b = run("fsgd", obj, sched, split, w0=w0, seed=4, batch=BatchSpec(32))
        assert np.array_equal(a.final_params, b.final_params)
        assert np.array_equal(a.column("grad_diff_sq"), b.column("grad_diff_sq"))

    def test_empty_prior_fgd(self, blob_problem):
        obj, _, w0 = blob_problem
        log = run("fgd", obj, Schedule.constant(5, 0.5, eps=0.05), IndexSplit.from_prior([], 400), w0=w0)
        assert np.all(log.column("empty_prior_batch") == 1)
        assert math.isnan(log.final["train_risk_J"])

    def test_fsgd_empty_intersection_flag(self, blob_problem):
        obj, _, w0 = blob_problem
        split = IndexSplit.from_prior([0], 400)
        log = run("fsgd", obj, Schedule.constant(40, 0.5, eps=0.05), split, w0=w0, seed=0, batch=BatchSpec(4))
        flags = log.column("empty_prior_batch")
        sizes = log.column("prior_batch_size")
        assert np.array_equal(flags == 1, sizes == 0)
        assert flags.sum() >= 35

    def test_fsgd_stratified(self, blob_problem):
        obj, split, w0 = blob_problem
        log = run("fsgd", obj, Schedule.constant(20, 0.5, eps=0.05), split, w0=w0, seed=1,
                  batch=BatchSpec.stratified(6, 10))
        assert np.all(log.column("prior_batch_size") == 10)
        assert np.all(log.column("batch_size") == 16)

    def test_sgd_sees_same_batches(self, blob_problem):
        # with eps -> 0 floored SGD and plain SGD coincide, so the batch streams must match
        obj, split, w0 = blob_problem
        sched = Schedule.constant(40, 0.5, eps=1e-10)
        f = run("fsgd", obj, sched, split, w0=w0, seed=8, batch=BatchSpec(20))
        g = run("sgd", obj, sched, split, w0=w0, seed=8, batch=BatchSpec(20))
        assert np.max(np.abs(f.final_params - g.final_params)) <= 1e-7

    def test_inverse_t_keeps_sum_bounded(self, blob_problem):
        obj, split, w0 = blob_problem
        c, eps = 0.5, 0.05
        log = run("fgd", obj, Schedule.inverse_t(300, c, eps=eps), split, w0=w0)
        gmax = log.column("grad_diff_sq").max()
        assert log.total("grad_diff_sq_weighted_eps") <= (c / eps) ** 2 * math.pi**2 / 6 * gmax
        tail = log.cumulative("grad_diff_sq_weighted_eps")
        assert tail[-1] - tail[149] <= (c / eps) ** 2 * gmax / 150


class TestRounded:
    def test_mean_is_floor_plus_half(self):
        obj = QuadraticObjective([[-0.37, 0.81]])
        sched = Schedule.constant(1, 1.0, eps=0.1)
        rng = np.random.default_rng(0)
        draws = np.array([step_rgd(OptState.start([0.0, 0.0]), obj, sched, 1, rng)[0].w for _ in range(20000)])
        x = np.array([0.37, -0.81]) / 0.1
        expected = -0.1 * (np.floor(x) + 0.5)
        se = 0.1 * 0.5 / math.sqrt(20000)
        assert np.all(np.abs(draws.mean(axis=0) - expected) < 5 * se)

    def test_on_lattice(self, blob_problem):
        obj, split, w0 = blob_problem
        log = run("rgd", obj, Schedule.constant(20, 0.5, eps=0.05), split, w0=w0, seed=3)
        steps = (log.final_params - w0) / 0.05
        assert np.allclose(steps, np.round(steps), atol=1e-6)
        assert log.has("grad_diff_sq_weighted_eps")


class TestLangevin:
    def test_small_sigma_is_gd(self, blob_problem):
        obj, split, w0 = blob_problem
        g = run("gld", obj, Schedule.constant(50, 0.5, sigma=1e-12), split, w0=w0, seed=0)
        d = run("gd", obj, Schedule.constant(50, 0.5), split, w0=w0)
        assert np.max(np.abs(g.final_params - d.final_params)) < 1e-9

    def test_noise_only_variance(self):
        obj = ZeroObjective(20000)
        sig = np.linspace(0.1, 0.3, 10)
        log = run("gld", obj, Schedule(10, 0.0, sigma=sig), w0=np.zeros(20000), seed=1)
        expected = float(np.sum(sig**2))
        se = expected * math.sqrt(2 / 20000)
        assert abs(log.final_params.var() - expected) < 5 * se

    def test_gaussian_step_kl(self, blob_problem):
        # KL between the posterior and prior Langevin transitions is |gamma (gS - gJ)|^2 / (2 sigma^2)
        obj, split, w0 = blob_problem
        gamma, sigma = 0.3, 0.2
        log = run("gld", obj, Schedule.constant(1, gamma, sigma=sigma), split, w0=w0, seed=0)
        diff = obj.grad(w0) - obj.grad(w0, split.J)
        kl = float((gamma * diff) @ (gamma * diff)) / (2 * sigma**2)
        assert log.records[0]["grad_diff_sq_weighted_sigma"] / 2 == pytest.approx(kl, rel=1e-12)
        L = obj.per_example_grad_norms(w0).max()
        assert log.records[0]["Lw_sq_weighted"] == pytest.approx((gamma / sigma * L) ** 2, rel=1e-12)
        assert log.sums()["schedule_sum"] == pytest.approx((gamma / sigma) ** 2)

    def test_sgld_batch_unbiased(self, blob_problem):
        obj, split, w0 = blob_problem
        b = 16
        sched = Schedule.constant(1, 0.0, sigma=1.0)
        rng = np.random.default_rng(0)
        devs = [step_sgld(OptState.start(w0), obj, split, sched, BatchSpec(b, BatchMode.WITH_REPLACEMENT), 1,
                          rng)[1]["batch_grad_dev_sq"] for _ in range(3000)]
        G = obj.per_example_grads(w0)
        trace_cov = float(np.sum(G.var(axis=0)))
        assert np.mean(devs) == pytest.approx(trace_cov / b, rel=0.08)

    def test_sgld_requires_replacement(self, blob_problem):
        obj, split, w0 = blob_problem
        with pytest.raises(StepError) as exc:
            run("sgld", obj, Schedule.constant(2, 0.1, sigma=0.1), split, w0=w0, batch=BatchSpec(8))
        assert exc.value.step == 1


class TestContinuous:
    def test_initial_variance(self):
        obj = ZeroObjective(40000)
        sched = Schedule(0, [], beta=2.0, lambda_reg=0.5)
        log = run("cld", obj, sched, dt=0.1, seed=0)
        assert log.T == 0
        assert abs(log.final_params.var() - 1.0) < 5 * math.sqrt(2 / 40000)

    def test_dt_halving_moves_toward_stationary(self):
        # EM stationary variance for the OU process is 1/(lambda beta) / (1 - lambda dt / 2)
        obj = ZeroObjective(20000)
        errs = []
        for dt in (0.2, 0.1):
            sched = Schedule(150, np.zeros(150), beta=2.0, lambda_reg=1.0)
            v = run("cld", obj, sched, dt=dt, seed=3).final_params.var()
            em = 0.5 / (1 - dt / 2)
            assert abs(v - em) < 5 * em * math.sqrt(2 / 20000)
            errs.append(abs(v - 0.5))
        assert errs[1] < errs[0]

    def test_quadrature_column(self, blob_problem):
        obj, split, w0 = blob_problem
        sched = Schedule(10, np.zeros(10), beta=1.0, lambda_reg=1.0)
        log = run("cld", obj, sched, split, w0=w0, dt=0.05, loss_bound=0.5, seed=0)
        alpha = 1.0 / math.exp(4.0)
        weights = np.exp(alpha * (np.arange(10) * 0.05 - 0.5)) * 0.05
        assert np.allclose(log.column("cld_quad"), weights * log.column("grad_diff_sq"), rtol=1e-13)
        assert log.metadata["horizon"] == pytest.approx(0.5)

    def test_needs_dt(self, blob_problem):
        obj, split, w0 = blob_problem
        with pytest.raises(ValueError, match="dt"):
            run("cld", obj, Schedule(1, [0.0], beta=1.0, lambda_reg=1.0), split, w0=w0)


class _Exploding:
    dim, n = 1, 1

    def __init__(self):
        self.calls = 0

    def loss_grad(self, w, idx=None):
        self.calls += 1
        if self.calls == 3:
            raise ArithmeticError("boom")
        return QuadraticObjective([[0.0]]).loss_grad(w)

    def loss(self, w, idx=None):
        return 0.0

    def risk(self, w, idx=None):
        return math.nan


class TestRunAndLog:
    def test_step_error(self):
        with pytest.raises(StepError) as exc:
            run("gd", _Exploding(), Schedule.constant(5, 0.1), w0=[1.0])
        assert exc.value.step == 3 and "boom" in str(exc.value)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_is_step_error(self, blob_problem):
        obj = QuadraticObjective([[0.0]])
        with pytest.raises(StepError, match="non-finite"):
            run("gd", obj, Schedule.constant(2000, 3.0), w0=[1.0])

    def test_argument_checks(self, blob_problem):
        obj, split, w0 = blob_problem
        with pytest.raises(ValueError):
            run("fgd", obj, Schedule.constant(1, 0.1, eps=0.1), w0=w0)
        with pytest.raises(ValueError):
            run("fsgd", obj, Schedule.constant(1, 0.1, eps=0.1), split, w0=w0)
        with pytest.raises(ValueError):
            run("gd", obj, Schedule.constant(1, 0.1))
        with pytest.raises(ValueError):
            run("fgd", obj, Schedule.constant(1, 0.1, eps=0.1), IndexSplit.from_prior([0], 10), w0=w0)

    def test_eval_cadence(self, blob_problem):
        obj, split, w0 = blob_problem
        log = run("fgd", obj, Schedule.constant(10, 0.5, eps=0.05), split, w0=w0, eval_every=4)
        evaluated = np.isfinite(log.column("train_risk_I"))
        assert evaluated.tolist() == [t in (4, 8, 10) for t in range(1, 11)]
        assert log.final["train_risk_I"] == log.records[-1]["train_risk_I"]

    def test_total_raises_on_gaps(self, blob_problem):
        obj, split, w0 = blob_problem
        log = run("fgd", obj, Schedule.constant(3, 0.5, eps=0.05), split, w0=w0)
        with pytest.raises(KeyError):
            log.total("Lw_sq")
        with pytest.raises(KeyError):
            log.column("no_such_column")

    def test_save_load_round_trip(self, blob_problem, tmp_path):
        obj, split, w0 = blob_problem
        log = run("fsgd", obj, Schedule.constant(12, 0.5, eps=0.05), split, w0=w0, seed=2, batch=BatchSpec(16))
        log.save(tmp_path / "traj")
        header = (tmp_path / "traj.csv").read_text().splitlines()[0].split(",")
        assert header == list(STEP_COLUMNS)
        back = TrajectoryLog.load(tmp_path / "traj")
        assert back.T == 12 and back.algorithm == "fsgd"
        for name in ("grad_diff_sq_weighted_eps", "prior_batch_size", "lattice_sq"):
            assert np.array_equal(back.column(name), log.column(name))
        assert np.array_equal(back.final_params, log.final_params)
        assert back.metadata["m"] == 200 and back.metadata["batch_mode"] == "without_replacement"
        assert back.sums() == log.sums()
