import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pertmax.core import (RETAIN_ALL, TOP, DomainError, PointMeasure, StepFunction, TailLaw,
                          step_eval, validate_measure)


def test_constant_function():
    f = StepFunction(0.0, horizon=1.0)
    assert step_eval(f, 0.7) == 0.0


def test_right_continuity_at_jump():
    f = StepFunction.from_jumps(1.0, [(0.5, 3.0)], 1.0)
    assert step_eval(f, 0.5) == 3.0
    assert step_eval(f, 0.49) == 1.0
    assert f(1.0) == 3.0


@pytest.mark.parametrize("t", [-0.1, 1.01, float("nan")])
def test_eval_outside_horizon(t):
    f = StepFunction.from_jumps(1.0, [(0.5, 3.0)], 1.0)
    with pytest.raises(DomainError):
        step_eval(f, t)


def test_jump_times_validated():
    with pytest.raises(DomainError):
        StepFunction.from_jumps(0.0, [(0.0, 1.0)], 1.0)
    with pytest.raises(DomainError):
        StepFunction.from_jumps(0.0, [(1.5, 1.0)], 1.0)
    with pytest.raises(ValueError):
        StepFunction.from_jumps(0.0, [(0.5, 1.0), (0.5, 2.0)], 1.0)


def test_immutable_buffers():
    f = StepFunction.from_jumps(0.0, [(0.5, 1.0)], 1.0)
    with pytest.raises(ValueError):
        f.times[0] = 0.2


jump_lists = st.lists(
    st.tuples(st.floats(0.001, 1.0), st.floats(-10, 10)), max_size=20, unique_by=lambda p: p[0]
).map(lambda js: sorted(js))


@given(st.floats(-10, 10), jump_lists)
def test_jump_roundtrip(init, jumps):
    f = StepFunction.from_jumps(init, jumps, 1.0)
    assert f.jumps == [(float(t), float(v)) for t, v in jumps]
    assert StepFunction.from_json(f.to_json()) == f


@given(st.floats(-10, 10), jump_lists, st.floats(0, 1))
def test_constant_between_jumps(init, jumps, t):
    f = StepFunction.from_jumps(init, jumps, 1.0)
    nxt = f.times[f.times > t]
    end = nxt[0] if nxt.size else 1.0
    probes = np.linspace(t, end, 7, endpoint=nxt.size == 0)
    assert np.all(step_eval(f, probes) == step_eval(f, t))


def test_from_samples_keeps_only_changes():
    f = StepFunction.from_samples(np.array([0, 0.25, 0.5, 0.75]), np.array([1.0, 1.0, 2.0, 2.0]), 1.0)
    assert f.jumps == [(0.5, 2.0)]


def test_step_csv(tmp_path):
    f = StepFunction.from_jumps(1.0, [(0.5, 3.0)], 1.0)
    f.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines == ["t,value", "0.0,1.0", "0.5,3.0"]


def test_validate_empty():
    assert validate_measure(PointMeasure([], [], 1.0)) is None


def test_validate_unsorted():
    assert validate_measure(PointMeasure([0.2, 0.1], [1.0, 1.0], 1.0)) == "unsorted"


def test_validate_out_of_horizon():
    assert validate_measure(PointMeasure([1.5], [1.0], 1.0)) == "out of horizon"


def test_from_points_sorts_stably():
    nu = PointMeasure.from_points([(0.5, 1.0), (0.2, 2.0), (0.5, 3.0)], 1.0)
    assert nu.points == [(0.2, 2.0), (0.5, 1.0), (0.5, 3.0)]
    assert validate_measure(nu) is None


def test_top_mark_and_json_roundtrip():
    nu = PointMeasure.from_points([(0.1, TOP), (0.3, -2.0)], 1.0, RETAIN_ALL)
    d = json.loads(nu.to_json())
    assert d["points"][0][1] == "+inf"
    assert d["truncation"] == "-inf"
    back = PointMeasure.from_json(nu.to_json())
    assert back == nu
    assert back.marks[0] == math.inf


def test_measure_csv_roundtrip(tmp_path):
    nu = PointMeasure.from_points([(0.1, 2.5), (0.3, TOP)], 1.0)
    nu.to_csv(tmp_path / "nu.csv")
    assert PointMeasure.from_csv(tmp_path / "nu.csv", 1.0) == nu


def test_box_count_and_restrict():
    nu = PointMeasure.from_points([(0.1, 0.5), (0.4, 2.0), (0.9, 3.0)], 1.0)
    assert nu.count(0.0, 0.5, 0.4) == 2
    assert nu.count(0.0, 1.0, 2.0) == 1
    r = nu.restrict(1.0)
    assert r.points == [(0.4, 2.0), (0.9, 3.0)]
    assert r.truncation == 1.0


def test_tail_law():
    tl = TailLaw(2.0, 3.0)
    assert tl.tail_mass(2.0) == pytest.approx(0.25)
    assert tl.tail_mass(0.0) == math.inf
    with pytest.raises(DomainError):
        TailLaw(0.0, 2.0)
    with pytest.raises(DomainError):
        TailLaw(1.0, -1.0)
