import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from pertmax.core import DomainError, PointMeasure, StepFunction, step_eval
from pertmax.functional import (DemoParams, F_path, NotMatchedError, TimeChange, TimeChangeError,
                                build_time_change, check_demo_hypotheses, demo_limit_function,
                                demo_limit_measure, eval_F, modulus_of_continuity, partition_knots,
                                skorokhod_upper_bound, sup_distance, theorem2_demo_instance,
                                theorem2_demo_step)


def step(init, jumps, T=1.0):
    return StepFunction.from_jumps(init, jumps, T)


def test_eval_F_empty_measure():
    f = step(2.5, [(0.3, -1.0)])
    nu = PointMeasure([], [], 1.0)
    assert eval_F(f, nu, 0.9) == 2.5


def test_eval_F_single_point():
    f = step(0.0, [])
    nu = PointMeasure.from_points([(0.5, 2.0)], 1.0)
    assert eval_F(f, nu, 0.5) == 2.0
    assert eval_F(f, nu, 0.49) == 0.0


def test_eval_F_two_points():
    f = step(0.0, [(0.3, -1.0)])
    nu = PointMeasure.from_points([(0.2, 1.0), (0.6, 0.5)], 1.0)
    assert eval_F(f, nu, 1.0) == 1.0


def test_eval_F_errors():
    f = step(0.0, [])
    with pytest.raises(DomainError):
        eval_F(f, PointMeasure([], [], 2.0), 0.5)
    with pytest.raises(DomainError):
        eval_F(f, PointMeasure([0.5, 0.1], [1.0, 1.0], 1.0), 0.5)
    with pytest.raises(DomainError):
        eval_F(f, PointMeasure([], [], 1.0), 1.5)


points = st.lists(st.tuples(st.floats(0, 1), st.floats(-5, 5)), max_size=15)
jumps = st.lists(st.tuples(st.floats(0.001, 1), st.floats(-5, 5)), max_size=10,
                 unique_by=lambda p: p[0]).map(sorted)


def brute_F(f, pts, t):
    vals = [f(s) + y for s, y in pts if s <= t]
    return max(vals) if vals else f.initial_value


@given(st.floats(-5, 5), jumps, points, st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_eval_F_matches_definition(init, js, pts, ts):
    f = step(init, js)
    nu = PointMeasure.from_points(pts, 1.0)
    got = eval_F(f, nu, np.array(ts))
    assert got.tolist() == [brute_F(f, pts, t) for t in ts]


@given(st.floats(-5, 5), jumps, points)
def test_F_path_agrees_with_eval_F(init, js, pts):
    f = step(init, js)
    nu = PointMeasure.from_points(pts, 1.0)
    g = F_path(f, nu)
    probes = np.union1d(np.random.default_rng(0).random(100), nu.times)
    expect = eval_F(f, nu, probes)
    # before the first atom F is f(0); an atom at 0 moves the initial value
    assert np.array_equal(step_eval(g, probes), expect)
    assert set(g.times).issubset(set(nu.times))


@given(st.floats(-5, 5), jumps, points, st.tuples(st.floats(0, 1), st.floats(-5, 5)), st.floats(0, 1))
def test_F_monotone_in_atoms(init, js, pts, extra, t):
    # with no atom at or before t, F is the fallback f(0), which a new atom may undercut
    assume(any(s <= t for s, _ in pts))
    f = step(init, js)
    base = eval_F(f, PointMeasure.from_points(pts, 1.0), t)
    more = eval_F(f, PointMeasure.from_points(pts + [extra], 1.0), t)
    if extra[0] <= t:
        assert more >= base
    else:
        assert more == base


@given(st.floats(-5, 5), jumps, points, st.floats(0, 3), st.floats(0, 1))
def test_F_monotone_in_marks(init, js, pts, bump, t):
    assume(pts)
    f = step(init, js)
    nu = PointMeasure.from_points(pts, 1.0)
    raised = PointMeasure(nu.times, nu.marks + bump, 1.0)
    assert eval_F(f, raised, t) >= eval_F(f, nu, t)


@given(st.floats(-5, 5), jumps, points, st.integers(-8, 8), st.floats(0, 1))
def test_F_translation_equivariant(init, js, pts, shift, t):
    # integer shifts keep the floating-point arithmetic exact
    f = step(init, js)
    g = StepFunction(f.initial_value + shift, f.times, f.values + shift, 1.0)
    nu = PointMeasure.from_points(pts, 1.0)
    assert eval_F(g, nu, t) == pytest.approx(eval_F(f, nu, t) + shift, abs=1e-12)


@given(st.floats(-5, 5), jumps, points, st.floats(0, 1))
def test_F_coarse_lower_bound(init, js, pts, t):
    f = step(init, js)
    nu = PointMeasure.from_points(pts, 1.0)
    before = [(s, y) for s, y in pts if s <= t]
    assume(before)
    bound = max(y for _, y in before) + min(f(s) for s, _ in before)
    assert eval_F(f, nu, t) >= bound


def test_time_change_examples():
    nu_n = PointMeasure.from_points([(0.4, 2.0), (0.7, 0.01)], 1.0)
    nu_0 = PointMeasure.from_points([(0.5, 2.0), (0.1, 0.02)], 1.0)
    lam = build_time_change(nu_n, nu_0, 1.0, 1.0)
    assert lam.knots_x.tolist() == [0.0, 0.4, 1.0]
    assert lam.knots_y.tolist() == [0.0, 0.5, 1.0]
    assert lam(0.2) == pytest.approx(0.25)
    assert lam.inverse(0.25) == pytest.approx(0.2)
    assert lam.sup_deviation() == pytest.approx(0.1)


def test_time_change_identity_and_errors():
    nu = PointMeasure.from_points([(0.3, 2.0)], 1.0)
    lam = build_time_change(nu, nu, 0.5, 1.0)
    assert lam.sup_deviation() == 0.0
    with pytest.raises(NotMatchedError):
        build_time_change(nu, PointMeasure([], [], 1.0), 0.5, 1.0)
    with pytest.raises(TimeChangeError):
        build_time_change(PointMeasure.from_points([(0.3, 2.0), (0.6, 2.0)], 1.0),
                          PointMeasure.from_points([(0.6, 2.0), (0.6, 2.0)], 1.0), 0.5, 1.0)
    with pytest.raises(TimeChangeError):
        TimeChange(np.array([0.0, 0.5]), np.array([0.0, 1.0]))


def test_skorokhod_examples():
    g2 = step(0.0, [(0.5, 1.0)])
    assert skorokhod_upper_bound(g2, g2, TimeChange.identity(1.0)) == 0.0
    g1 = step(0.0, [(0.4, 1.0)])
    lam = TimeChange(np.array([0.0, 0.4, 1.0]), np.array([0.0, 0.5, 1.0]))
    assert skorokhod_upper_bound(g1, g2, lam) == pytest.approx(0.1)
    assert skorokhod_upper_bound(g1, g2, TimeChange.identity(1.0)) == 1.0


@settings(max_examples=60)
@given(st.floats(-5, 5), jumps, jumps, st.lists(st.floats(0.01, 0.99), max_size=5, unique=True))
def test_skorokhod_bound_matches_dense_grid(i1, j1, j2, knots):
    g1, g2 = step(i1, j1), step(0.0, j2)
    xs = np.sort(np.array([0.0, *knots, 1.0]))
    ys = np.sort(np.array([0.0, *np.random.default_rng(len(knots)).uniform(0.01, 0.99, len(knots)), 1.0]))
    assume(np.all(np.diff(ys) > 1e-6) and np.all(np.diff(xs) > 1e-6))
    lam = TimeChange(xs, ys)
    bound = skorokhod_upper_bound(g1, g2, lam)
    grid = np.linspace(0, 1, 20001)
    gap = lambda t: np.abs(step_eval(g1, t) - step_eval(g2, np.minimum(lam(t), 1.0)))
    assert bound >= max(lam.sup_deviation(), np.max(gap(grid))) - 1e-12
    # g1 - g2(lam) is constant between consecutive breakpoints, so midpoints see every piece
    cuts = np.unique(np.concatenate(([0.0, 1.0], g1.times, lam.inverse(g2.times))))
    mids = np.append(0.5 * (cuts[:-1] + cuts[1:]), 1.0)
    assert bound == max(lam.sup_deviation(), np.max(gap(mids)))


def test_sup_distance():
    assert sup_distance(step(0.0, [(0.5, 1.0)]), step(0.0, [(0.6, 1.5)])) == 1.0


def brute_modulus(f, eps):
    b = f.breakpoints()
    vals = f.level_values()
    ends = np.append(b[1:], f.horizon)
    best = 0.0
    for i in range(vals.size):
        for j in range(i + 1, vals.size):
            # closest points of [b_i, e_i) and [b_j, e_j) are e_i (not included) and b_j
            if b[j] - ends[i] < eps:
                best = max(best, abs(vals[i] - vals[j]))
    return best


@given(st.floats(-5, 5), jumps, st.floats(1e-4, 1.5))
def test_modulus_matches_pairwise(init, js, eps):
    f = step(init, js)
    assert modulus_of_continuity(f, eps) == brute_modulus(f, eps)


def test_modulus_examples():
    assert modulus_of_continuity(step(3.0, []), 0.1) == 0.0
    assert modulus_of_continuity(step(0.0, [(0.5, 2.0)]), 1e-9) == 2.0
    h = 1e-4
    t = np.arange(0, 1, h)
    lin = StepFunction.from_samples(t, t, 1.0)
    for eps in (0.01, 0.1, 0.5):
        assert modulus_of_continuity(lin, eps) == pytest.approx(eps, abs=2 * h)
    with pytest.raises(DomainError):
        modulus_of_continuity(lin, 0.0)


def test_partition_avoids_dyadics():
    knots = partition_knots(64, 1.0)
    assert knots[0] == 0.0 and knots[-1] == 1.0
    inner = knots[1:-1]
    assert np.all(np.diff(knots) > 0)
    nu0 = demo_limit_measure(DemoParams())
    assert not np.any(np.isin(inner, nu0.times))


def test_demo_hypotheses():
    # the polygon has slope at most 3.6, so sampled jumps stay below 4 * resolution
    for res, levels in ((1e-2, 4), (1e-3, 8), (1e-4, 12)):
        p = DemoParams(resolution=res, levels=levels)
        f0, nu0 = demo_limit_function(p), demo_limit_measure(p)
        assert check_demo_hypotheses(f0, nu0, p.atom_resolution, 4 * res) == []
        assert check_demo_hypotheses(f0, nu0, p.atom_resolution / 2, 4 * res) != []


@pytest.mark.parametrize("n", [10, 100, 1000, 10_000])
def test_demo_instance_rates(n):
    f_n, nu_n, f0, nu0 = theorem2_demo_instance(n)
    assert sup_distance(f_n, f0) <= 0.5 / n + 1e-12
    assert len(nu_n) == len(nu0)
    assert np.all(nu_n.marks > 0)


def test_demo_bound_chain():
    rows = [theorem2_demo_step(n) for n in (10, 100, 1000, 10_000)]
    for r in rows:
        assert np.isfinite(r["bound"]) and r["bound"] <= r["majorant"]
    assert rows[-1]["bound"] < rows[0]["bound"] / 10
    assert rows[-1]["lambda_deviation"] < rows[0]["lambda_deviation"]


def test_demo_identity_bound_zero():
    p = DemoParams()
    g = F_path(demo_limit_function(p), demo_limit_measure(p))
    assert skorokhod_upper_bound(g, g, TimeChange.identity(1.0)) == 0.0
