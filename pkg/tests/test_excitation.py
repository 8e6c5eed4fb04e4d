import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp

from sampid.actuator import MotorModelKind
from sampid.cmaes import CmaesConfig
from sampid.controller import GAITS, CommandVector, make_controller
from sampid.dataset import NoiseSpec
from sampid.dynamics.models import (make_double_pendulum, make_linear_debug, make_planar_quadruped,
                                    standing_state)
from sampid.dynamics.params import ParamVector
from sampid.dynamics.state import SimState
from sampid.errors import InvalidArgumentError, SensitivityFailedError
from sampid.excitation import (BezierCommandPlan, ExcitationConfig, FimEstimate, PlanSegment,
                               bezier_curve, bezier_eval, default_template, excitation_objective,
                               fd_sensitivity, fim_accumulate, load_plan, objective_value,
                               optimize_plan, plan_to_commands, save_plan, trace_inverse)

LIN = make_linear_debug(0.9)
QUAD = make_planar_quadruped()
X_ROW = 12  # tangent row of the scalar state


# ------------------------------------------------------------------ curves


def test_bezier_examples():
    assert bezier_eval([2.5] * 11, 0.37) == pytest.approx(2.5, abs=1e-14)
    pts = np.arange(11.0) ** 2
    assert bezier_eval(pts, 0.0) == 0.0 and bezier_eval(pts, 1.0) == 100.0
    e = np.zeros(11)
    e[-1] = 1.0
    assert bezier_eval(e, 0.5) == pytest.approx(0.5 ** 10, rel=1e-12)
    assert 0.5 ** 10 == pytest.approx(9.7656e-4, rel=1e-4)


def test_bezier_matches_bernstein_oracle(rng):
    mp.dps = 30
    pts = rng.normal(size=11)
    for s in (0.1, 0.33, 0.8):
        ref = sum(mp.binomial(10, k) * mp.mpf(s) ** k * (1 - mp.mpf(s)) ** (10 - k) * pts[k] for k in range(11))
        assert bezier_eval(pts, s) == pytest.approx(float(ref), abs=1e-12)
    S = np.linspace(0, 1, 7)
    assert np.allclose(bezier_curve(pts, S), [bezier_eval(pts, s) for s in S], atol=1e-13)


def test_bezier_range_error():
    with pytest.raises(InvalidArgumentError):
        bezier_eval(np.zeros(11), 1.2)
    with pytest.raises(InvalidArgumentError):
        bezier_curve(np.zeros(11), [-0.1, 0.5])


# ------------------------------------------------------------------ plans


def test_plan_resampling_sizes_and_gaits():
    one = BezierCommandPlan.constant(1, {"vx": 0.3}, channels=("vx", "pitch"), bounds=[(-1, 1), (-1, 1)])
    cmds = plan_to_commands(one, 0.02)
    assert len(cmds) == 200 and all(c.vx == pytest.approx(0.3) and c.pitch == 0.0 for c in cmds)
    long = BezierCommandPlan.constant(10, {"vx": 0.1})
    assert plan_to_commands(long, 0.02).__len__() == 2000
    two = long.with_gaits([1, 3] + [1] * 8)
    cmds = plan_to_commands(two, 0.02, CommandVector(h=0.3))
    assert (cmds[199].b1, cmds[199].b2) == GAITS[1]
    assert (cmds[200].b1, cmds[200].b2) == GAITS[3]
    assert (cmds[400].b1, cmds[400].b2) == GAITS[1]
    assert all(c.h == 0.3 for c in cmds)


def test_plan_validation_and_json(tmp_path, rng):
    with pytest.raises(InvalidArgumentError):
        BezierCommandPlan.constant(1, {"vx": 2.0}, channels=("vx",), bounds=[(-1, 1)])
    with pytest.raises(InvalidArgumentError):
        PlanSegment(np.zeros((1, 11)), gait=4)
    with pytest.raises(InvalidArgumentError):
        plan_to_commands(BezierCommandPlan(()), 0.02)
    plan = BezierCommandPlan.random(default_template(QUAD, 3), rng)
    back = load_plan(save_plan(tmp_path / "plan.json", plan))
    assert back.gaits == plan.gaits
    assert np.array_equal(back.continuous(), plan.continuous())
    assert np.array_equal(back.bounds, plan.bounds)
    # random plans respect the channel bounds
    X = plan.continuous()
    cb = plan.continuous_bounds()
    assert np.all(X >= cb[:, 0]) and np.all(X <= cb[:, 1])


# ------------------------------------------------------------------ sensitivities


def _lin_state(x):
    v = standing_state(LIN).to_vector()
    v[13] = x
    return v


def test_linear_sensitivity_is_state():
    th = ParamVector.scalar("gain", 0.9)
    for x in (-2.0, 0.3, 5.0):
        S = fd_sensitivity(_lin_state(x), np.array([0.7]), th, 1e-5, LIN)
        assert S.shape[1] == 1
        assert abs(S[X_ROW, 0] - x) < 1e-8
        assert np.count_nonzero(np.delete(S[:, 0], X_ROW)) == 0


def test_inactive_kappa_gives_zero_column():
    th = QUAD.default_theta()
    s = standing_state(QUAD, height=2.0)  # in the air, joints at rest on target
    S = fd_sensitivity(s, s.q_jnt, th, 1e-4 * np.maximum(1.0, np.abs(th.values)), QUAD)
    kap = [i for i, n in enumerate(th.names()) if n.startswith("kappa")]
    assert np.max(np.abs(S[:, kap])) < 1e-10


def _pendulum_case():
    model = make_double_pendulum(MotorModelKind.IDEAL)
    th = model.default_theta()
    s = SimState(np.zeros(3), [1, 0, 0, 0], np.zeros(3), np.zeros(3), [0.6, -0.4], [0.5, -1.0])
    return model, th, s


def test_pendulum_sensitivity_matches_richardson():
    model, th, s = _pendulum_case()
    u = np.array([0.2, 0.1])

    def central(h):
        return fd_sensitivity(s, u, th, h, model, indices=[0])[:, 0]

    h = 1e-2
    ref = (4.0 * central(h / 2) - central(h)) / 3.0
    got = central(1e-4)
    assert np.linalg.norm(ref) > 1e-3
    assert np.linalg.norm(got - ref) <= 1e-4 * np.linalg.norm(ref)


def test_sensitivity_errors():
    model, th, s = _pendulum_case()
    with pytest.raises(InvalidArgumentError):
        fd_sensitivity(s, np.zeros(2), th, 0.0, model)
    # a huge step on log-mass makes the light side blow up
    with pytest.raises(SensitivityFailedError) as info:
        fd_sensitivity(s, np.array([30.0, 30.0]), th, [1e-4, 40.0], model, indices=[1, 0])
    assert info.value.param_index == 0


# ------------------------------------------------------------------ information


def _lin_plan(values, seconds=4.0):
    pts = np.asarray(values, dtype=float).reshape(1, -1)
    return BezierCommandPlan((PlanSegment(pts, 1, seconds),), ("vx",), [(-1.0, 1.0)])


def _lin_states(theta, plan):
    u = np.array([c.vx for c in plan_to_commands(plan, LIN.dt_control)])
    x = np.zeros(u.size + 1)
    for t in range(u.size):
        x[t + 1] = theta * x[t] + u[t]
    return x[:-1]


def test_linear_fim_closed_form():
    th = ParamVector.scalar("gain", 0.9)
    plan = _lin_plan([1.0, -0.5, 0.8])
    ctl = make_controller(LIN)
    for sigma in (1.0, 0.3):
        F = fim_accumulate(None, plan, th, ctl, LIN, config=ExcitationConfig(sigma=sigma))
        ref = np.sum(_lin_states(0.9, plan) ** 2) / sigma ** 2
        assert F.n_samples == 200 and not F.terminated
        assert abs(F.matrix[0, 0] - ref) < 1e-8 * max(1.0, ref)


def test_zero_duration_plan():
    th = ParamVector.scalar("gain", 0.9)
    F = fim_accumulate(None, BezierCommandPlan((), ("vx",), [(-1, 1)]), th, make_controller(LIN), LIN)
    assert F.n_samples == 0 and np.all(F.matrix == 0)


def _short_plan(n_segments, gaits, vx=0.3, seconds=0.5):
    pts = np.array([[vx] * 11, [0.0] * 11])
    segs = tuple(PlanSegment(pts, g, seconds) for g in gaits[:n_segments])
    return BezierCommandPlan(segs, ("vx", "pitch"), [(-0.3, 0.6), (-0.15, 0.15)])


@pytest.fixture(scope="module")
def quad_fims():
    th = QUAD.default_theta()
    ctl = make_controller(QUAD)
    out = []
    for n in (1, 2, 3):
        out.append(fim_accumulate(None, _short_plan(n, [1, 3, 0]), th, ctl, QUAD))
    return out


def test_fim_symmetric_psd(quad_fims):
    for F in quad_fims:
        M = F.matrix
        assert np.max(np.abs(M - M.T)) <= 1e-9 * max(1.0, np.max(np.abs(M)))
        assert np.min(np.linalg.eigvalsh(M)) >= -1e-9 * max(1.0, np.max(np.abs(M)))


def test_fim_information_monotone(quad_fims):
    for a, b in zip(quad_fims, quad_fims[1:]):
        assert b.n_samples > a.n_samples
        diff = b.matrix - a.matrix
        assert np.min(np.linalg.eigvalsh(diff)) >= -1e-9 * np.max(np.abs(b.matrix))
        assert np.all(np.linalg.eigvalsh(b.matrix) >= np.linalg.eigvalsh(a.matrix) - 1e-9 * np.max(np.abs(b.matrix)))


def test_dynamic_plan_carries_more_information():
    th = QUAD.default_theta()
    ctl = make_controller(QUAD)
    cfg = ExcitationConfig(observation_noise=NoiseSpec.encoder_level())
    still = _short_plan(1, [1], vx=0.0, seconds=2.0)
    pronk = _short_plan(1, [3], vx=0.5, seconds=2.0)
    for seed in range(5):
        a = fim_accumulate(None, still, th, ctl, QUAD, noise_seed=seed, config=cfg)
        b = fim_accumulate(None, pronk, th, ctl, QUAD, noise_seed=seed, config=cfg)
        assert b.trace() > a.trace()


# ------------------------------------------------------------------ objective


def test_trace_inverse_examples():
    d = 5
    assert trace_inverse(np.eye(d), 1e-12) == pytest.approx(d, rel=1e-9)
    assert trace_inverse(np.diag([1.0, 4.0]), 0.0) == pytest.approx(1.25, abs=1e-15)
    assert trace_inverse(np.zeros((2, 2)), 0.0) == math.inf


def test_fall_penalty_constructed_case():
    F = np.diag([3.0, 2.0, 5.0])
    P = 40.0
    fell = FimEstimate(F, survived=0.5, terminated=True)
    ok = FimEstimate(F, survived=1.0)
    assert objective_value(fell, 1e-3, P) - objective_value(ok, 1e-3, P) == pytest.approx(0.5 * P, rel=1e-12)


def test_objective_requires_positive_reg():
    th = ParamVector.scalar("gain", 0.9)
    with pytest.raises(InvalidArgumentError):
        excitation_objective(_lin_plan([0.1] * 3), th, make_controller(LIN), LIN, reg=0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 100.0), min_size=3, max_size=3), st.floats(1e-6, 10.0), st.floats(1e-6, 10.0))
def test_trace_inverse_decreasing_in_reg(diag, r1, r2):
    if abs(r1 - r2) < 1e-9:
        return
    lo, hi = min(r1, r2), max(r1, r2)
    F = np.diag(diag) + 0.1 * np.ones((3, 3))
    assert trace_inverse(F, hi) < trace_inverse(F, lo)


def test_sigma_scaling_keeps_argmin(rng):
    th = ParamVector.scalar("gain", 0.9)
    ctl = make_controller(LIN)
    plans = [_lin_plan(rng.uniform(-1, 1, 3)) for _ in range(12)]
    reg = 5.0
    base = np.array([excitation_objective(p, th, ctl, LIN, reg) for p in plans])
    for s in (0.1, 3.0):
        cfg = ExcitationConfig(sigma=s)
        scaled = np.array([excitation_objective(p, th, ctl, LIN, reg / s ** 2, config=cfg) for p in plans])
        assert np.argmin(scaled) == np.argmin(base)
        assert np.allclose(scaled, base * s ** 2, rtol=1e-10)
        F1 = fim_accumulate(None, plans[0], th, ctl, LIN)
        Fs = fim_accumulate(None, plans[0], th, ctl, LIN, config=cfg)
        assert np.allclose(Fs.matrix, F1.matrix / s ** 2, rtol=1e-12)


# ------------------------------------------------------------------ plan optimisation


def _grid_optimum(theta, reg, levels=11):
    """Exhaustive grid over three control points in closed form."""
    n = 200
    s = np.arange(n) / n
    basis = np.stack([(1 - s) ** 2, 2 * s * (1 - s), s ** 2])  # quadratic Bernstein
    grid = np.array(list(itertools.product(np.linspace(-1, 1, levels), repeat=3)))
    U = grid @ basis
    X = np.zeros((grid.shape[0], n + 1))
    for t in range(n):
        X[:, t + 1] = theta * X[:, t] + U[:, t]
    info = np.sum(X[:, :-1] ** 2, axis=1)
    return float(np.min(1.0 / (info + reg)))


def test_debug_plan_reaches_grid_optimum():
    th = ParamVector.scalar("gain", 0.9)
    template = default_template(LIN, 1, 3)
    res = optimize_plan(th, make_controller(LIN), LIN, CmaesConfig(population=8, iterations=30, seed=0),
                        template, config=ExcitationConfig(reg=1.0, init_samples=4))
    best = _grid_optimum(0.9, 1.0)
    assert res.value <= 1.05 * best
    # bang-bang: control points pinned at a bound with a common sign
    pts = res.plan.segments[0].points[0]
    assert np.all(np.abs(pts) > 0.9) and (np.all(pts > 0) or np.all(pts < 0))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_optimized_plan_beats_random_plans(seed):
    th = ParamVector.scalar("gain", 0.9)
    ctl = make_controller(LIN)
    template = default_template(LIN, 1, 11)
    cfg = ExcitationConfig(reg=1.0, init_samples=4)
    res = optimize_plan(th, ctl, LIN, CmaesConfig(population=8, iterations=20, seed=seed), template, config=cfg)
    rng = np.random.default_rng(100 + seed)
    rand = [excitation_objective(BezierCommandPlan.random(template, rng), th, ctl, LIN, res.reg,
                                 penalty=res.penalty, config=cfg) for _ in range(20)]
    assert res.value < min(rand)


def test_degenerate_template_unchanged():
    th = QUAD.default_theta()
    seg = PlanSegment(np.zeros((0, 11)), 2, 0.5)
    template = BezierCommandPlan((seg,), (), np.zeros((0, 2)))
    res = optimize_plan(th, make_controller(QUAD), QUAD, CmaesConfig(population=4, iterations=2), template)
    assert res.plan is template
