import math

import numpy as np
import pytest

from openmaps import DomainError, PotentialSpec, build_induced
from openmaps.pressure import (closed_pressure, dimension_threshold,
                               gurevich_Zn, pressure, pressure_grid,
                               punctured_pressure, regime, spec_diverges)

from frozen import P_CLOSED, P_RLR


def test_divergence_boundary(closed_sys):
    # tail power t*(1+1/g) crosses 1 at t = 1/3 for g = 1/2
    assert spec_diverges(closed_sys, PotentialSpec(0.2, 0.0))
    assert not spec_diverges(closed_sys, PotentialSpec(0.5, 0.0))
    assert not spec_diverges(closed_sys, PotentialSpec(0.2, 0.05))


def test_closed_pressure_frozen(closed_sys):
    assert closed_pressure(closed_sys, 0.5) == pytest.approx(
        P_CLOSED[0.5], abs=2e-5)


def test_closed_pressure_endpoints(closed_sys):
    # at t = 0 the weights are pure e^(-s*tau) and the root is log 2
    # (geometric series identity); at t = 1 conformality forces 0
    assert closed_pressure(closed_sys, 0.0) == pytest.approx(
        math.log(2.0), abs=1e-4)
    assert abs(closed_pressure(closed_sys, 1.0)) < 1e-3


def test_pressure_grid_shape_and_convexity(closed_sys):
    ts = np.linspace(0.0, 1.0, 6)
    ps = pressure_grid(closed_sys, ts, n_levels=4, budget=100_000)
    assert ps.shape == ts.shape
    assert np.all(np.diff(ps) < 0)
    assert np.all(np.diff(ps, 2) > -1e-3)


def test_punctured_below_closed_and_frozen(rlr_sys):
    ph = punctured_pressure(rlr_sys, 0.4)
    assert not ph.transient and not ph.boundary
    assert ph.value == pytest.approx(P_RLR[0.4], abs=2e-5)
    assert ph.value < closed_pressure(rlr_sys, 0.4)


def test_punctured_transient_past_threshold(rlr_sys):
    ph = punctured_pressure(rlr_sys, 0.95)
    assert ph.value == 0.0
    assert ph.transient
    assert ph.open_pressure < 0.0


def test_punctured_caches(rlr_sys):
    a = punctured_pressure(rlr_sys, 0.4)
    b = punctured_pressure(rlr_sys, 0.4)
    assert a is b


def test_threshold_closed_shortcut(closed_sys):
    th = dimension_threshold(closed_sys)
    assert th.value == 1.0 and th.boundary_high


def test_zn_pruned_vs_exhaustive(par, rlr_hole):
    # small alphabet, pruned table route against the exact-chain route
    # with pruning disabled
    sys8 = build_induced(par, hole=rlr_hole, n_max=8)
    for punctured in (False, True):
        spec = PotentialSpec(0.5, 0.2, punctured=punctured)
        for n in range(1, 5):
            fast = gurevich_Zn(sys8, spec, n)
            slow = gurevich_Zn(sys8, spec, n, prune_rel=0.0, exact=True)
            assert not fast.truncated and not slow.truncated
            assert fast.log_value == pytest.approx(slow.log_value, abs=1e-8)
            assert fast.word_count <= slow.word_count


def test_zn_validation(closed_sys):
    with pytest.raises(DomainError):
        gurevich_Zn(closed_sys, PotentialSpec(0.5, 0.2), 0)
    div = gurevich_Zn(closed_sys, PotentialSpec(0.2, 0.0), 3)
    assert div.log_value == math.inf


def test_regime_labels(par, rlr_hole):
    sys = build_induced(par, hole=rlr_hole, n_max=200)
    rep = regime(sys, 0.4, n_levels=4, budget=60_000)
    assert rep.regime == "spectral-gap"
    assert rep.pressure_punctured > 0.0
    assert rep.log_escape_rate == pytest.approx(
        -(rep.pressure_closed - rep.pressure_punctured), abs=1e-12)
    d = rep.as_dict()
    assert d["gamma"] == par.gamma and d["t"] == 0.4
    rep1 = regime(sys, 1.0, n_levels=4, budget=60_000)
    assert rep1.regime == "degenerate"
