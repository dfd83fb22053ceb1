import math

import pytest
from hypothesis import given, strategies as st

from brakesteer.analysis import (
    EmptyTrace,
    GridSpec,
    field_dump,
    lyapunov,
    ripple_bound,
    summarize,
)
from brakesteer.controller import Region, classify
from brakesteer.simulator import Trace, TraceRow

META = {
    "radius": 0.3,
    "dt_control": 0.02,
    "v_user": 1.0,
    "eps_theta": 0.02,
    "delta_profile": {"kind": "tanh", "amplitude": math.pi / 2, "gain": 1.0},
}


def make_trace(rows):
    return Trace(rows=tuple(rows), meta=dict(META))


def row(t, l=0.0, th=0.0, maneuver="go_straight", hybrid="straight", v=1.0):
    return TraceRow(
        t=t, x=t, y=0.0, theta=0.0, v=v, omega=0.0, s=t, l=l, theta_tilde=th,
        maneuver=maneuver, hybrid_state=hybrid, phase="track",
        V=lyapunov(l / META["radius"], th),
    )


# -- lyapunov ---------------------------------------------------------------


def test_lyapunov_values():
    assert lyapunov(0, 0) == 0.0
    assert lyapunov(1, 0) == 0.5
    assert lyapunov(3, -math.pi / 2) == pytest.approx(0.5 * (9 + math.pi**2 / 4))


_nondenormal = st.floats(-10, 10).filter(lambda x: x == 0.0 or abs(x) > 1e-150)


@given(_nondenormal, _nondenormal)
def test_lyapunov_even_and_positive(l, th):
    v = lyapunov(l, th)
    assert v >= 0.0
    assert v == lyapunov(-l, th) == lyapunov(l, -th)
    assert (v == 0.0) == (l == 0.0 and th == 0.0)


def test_ripple_bound_formula():
    assert ripple_bound(2.0, 0.02, 0.01, 1.0, 0.3) == pytest.approx(
        0.5 * (0.02**2 + 2 * 2.0 * 0.01 * 1.0 / 0.3)
    )


# -- summaries ---------------------------------------------------------------


def test_summarize_equilibrium_trace():
    tr = make_trace([row(0.02 * k) for k in range(100)])
    s = summarize(tr)
    assert s.converged
    assert s.switch_count == 0
    assert s.final_V == 0.0
    assert s.t_converge == 0.0
    assert s.lyapunov_violations == 0
    assert s.path_length == pytest.approx(99 * 0.02)


def test_summarize_truncated_run_not_converged():
    tr = make_trace([row(0.02 * k, l=1.0) for k in range(100)])
    s = summarize(tr)
    assert not s.converged
    assert s.t_converge is None


def test_summarize_counts_switches():
    maneuvers = ["go_straight", "turn_left", "turn_left", "go_straight", "turn_right"]
    tr = make_trace([row(0.02 * k, maneuver=m) for k, m in enumerate(maneuvers)])
    assert summarize(tr).switch_count == 3


def test_summarize_rejects_empty():
    with pytest.raises(EmptyTrace):
        summarize(make_trace([]))


def test_summarize_is_pure():
    tr = make_trace([row(0.02 * k, l=0.01 * k) for k in range(50)])
    assert summarize(tr) == summarize(tr)


# -- field dumps ---------------------------------------------------------------


def test_field_dump_shape_and_content():
    grid = GridSpec(n_l=11, n_theta=7)
    samples = field_dump(math.pi / 3, grid)
    assert len(samples) == 77
    for s in samples[::13]:
        assert s.region is classify(s.l_norm, s.theta_tilde, math.pi / 3)


def test_field_dump_zero_delta_collapse():
    # cos(0) folds the generalized boundaries onto the final-turn curves
    samples = field_dump(0.0, GridSpec(n_l=21, n_theta=21))
    for s in samples:
        assert s.sigma_n == pytest.approx(s.sigma_l, abs=1e-12)
        assert s.sigma_p == pytest.approx(s.sigma_r, abs=1e-12)


def test_field_dump_mirror_symmetry():
    grid = GridSpec(l_min=-3, l_max=3, theta_min=-3, theta_max=3, n_l=13, n_theta=13)
    delta = 1.1
    swap = {
        Region.RIGHT_TURN_FIRST: Region.LEFT_TURN_FIRST,
        Region.LEFT_TURN_FIRST: Region.RIGHT_TURN_FIRST,
        Region.ON_SIGMA_R: Region.ON_SIGMA_L,
        Region.ON_SIGMA_L: Region.ON_SIGMA_R,
    }
    a = field_dump(delta, grid)
    b = field_dump(-delta, grid)
    by_point = {(round(s.l_norm, 9), round(s.theta_tilde, 9)): s for s in b}
    for s in a:
        m = by_point[(round(-s.l_norm, 9), round(-s.theta_tilde, 9))]
        assert m.region is swap.get(s.region, s.region)
        assert m.sigma_r == pytest.approx(-s.sigma_l, abs=1e-12)
        assert m.sigma_n == pytest.approx(-s.sigma_p, abs=1e-12)


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(n_l=1)
    with pytest.raises(ValueError):
        GridSpec(l_min=math.inf)
