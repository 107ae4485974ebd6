import math

import numpy as np
import pytest

from openmaps import DomainError, MapParams, PotentialSpec, build_induced
from openmaps.induced import (eval_map_left, induced_potential, return_time,
                              tail_exponent_fit)
from openmaps.map_core import eval_deriv, eval_map


def _direct_return_block(par, x):
    """Follow x through one return to Y by brute iteration."""
    z = 2.0 * x - 1.0
    logdf = math.log(2.0)
    tau = 1
    while z < 0.5:
        logdf += math.log(eval_deriv(par, z, branch="L"))
        z = eval_map(par, z, branch="L")
        tau += 1
    return z, logdf, tau


def test_branch_domains_tile_y(closed_sys):
    lo, hi = closed_sys.branch_lo, closed_sys.branch_hi
    assert hi[0] == 1.0 and lo[0] == 0.75
    assert np.allclose(hi[1:], lo[:-1])
    assert np.all(np.diff(lo) < 0)


def test_return_time_agrees_with_iteration(par, closed_sys, rng):
    floor = closed_sys.branch_lo[-1]
    xs = rng.uniform(floor + 1e-9, 1.0, 40)
    taus = return_time(closed_sys, xs)
    for x, tau in zip(xs, taus):
        assert _direct_return_block(par, float(x))[2] == tau


def test_branch_for_floor(closed_sys):
    with pytest.raises(DomainError):
        closed_sys.branch_for(0.5000001 * 0.0 + closed_sys.branch_lo[-1] - 1e-6)


def test_induced_potential_matches_direct(par, closed_sys, rng):
    spec = PotentialSpec(t=0.7, s=0.3, shift=0.1)
    xs = rng.uniform(closed_sys.branch_lo[30], 1.0, 25)
    got = induced_potential(closed_sys, spec, xs)
    for x, v in zip(xs, got):
        _, logdf, tau = _direct_return_block(par, float(x))
        want = -spec.t * logdf - spec.s * tau + spec.shift
        assert v == pytest.approx(want, abs=1e-10)


def test_chains_invert_the_return_map(par, closed_sys):
    nodes = np.linspace(0.51, 0.99, 17)
    xi, logdf = closed_sys.chains(nodes)
    for k in (0, 1, 3, 7):
        z, s, tau = np.empty(17), np.empty(17), np.empty(17, dtype=int)
        for j in range(17):
            z[j], s[j], tau[j] = _direct_return_block(par, xi[k][j])
        assert np.all(tau == k + 1)
        assert np.max(np.abs(z - nodes)) < 1e-10
        assert np.max(np.abs(s - logdf[k])) < 1e-10


def test_hole_cuts_kill_covered_branch(par, rlr_hole, rlr_sys):
    # the hole cell covers the whole tau=2 branch and part of tau=3
    (a, b), = rlr_hole.intervals
    assert rlr_sys.branch(1).lo >= a - 1e-12 and rlr_sys.branch(1).hi <= b + 1e-12
    assert not rlr_sys.branch(1).survives
    assert rlr_sys.branch(2).survives and rlr_sys.branch(2).cuts
    lengths = rlr_sys.surviving_lengths()
    assert lengths[1] == 0.0
    widths = rlr_sys.branch_hi - rlr_sys.branch_lo
    assert np.all(lengths <= widths + 1e-15)


def test_punctured_potential_is_minus_inf_on_cuts(rlr_sys):
    spec = PotentialSpec(t=0.5, s=0.2, punctured=True)
    inside = 0.5 * (rlr_sys.branch(1).lo + rlr_sys.branch(1).hi)
    outside = 0.9
    vals = induced_potential(rlr_sys, spec, np.array([inside, outside]))
    assert vals[0] == -math.inf and math.isfinite(vals[1])
    closed = PotentialSpec(t=0.5, s=0.2, punctured=False)
    assert math.isfinite(induced_potential(rlr_sys, closed, inside))


def test_hole_below_resolution_warns(par):
    sys = build_induced(par, hole=[(1e-12, 2e-12)], n_max=50)
    assert any("resolution" in w for w in sys.warnings)
    assert all(len(sys.branch(k).cuts) == 0 for k in range(sys.n_max))


def test_build_induced_input_forms(par, rlr_hole):
    a = build_induced(par, hole=rlr_hole, n_max=60)
    b = build_induced(par, hole=tuple(rlr_hole.intervals), n_max=60)
    assert a.hole_intervals == b.hole_intervals
    for k in range(60):
        assert a.branch(k).cuts == b.branch(k).cuts
    with pytest.raises(DomainError):
        build_induced(par, n_max=4)
    with pytest.raises(DomainError):
        build_induced(MapParams(1.0), n_max=60)


def test_tail_exponent(closed_sys):
    fit = tail_exponent_fit(closed_sys)
    assert fit.expected == pytest.approx(-3.0)
    assert abs(fit.slope - fit.expected) < 0.1
    wfit = tail_exponent_fit(closed_sys, t=0.5)
    assert wfit.expected == pytest.approx(-1.5)
    assert abs(wfit.slope - wfit.expected) < 0.1


def test_tail_weight_bound_regimes(closed_sys):
    assert closed_sys.tail_weight_bound(PotentialSpec(0.5, s=0.3)) < math.inf
    assert closed_sys.tail_weight_bound(PotentialSpec(0.9, s=0.0)) < math.inf
    assert closed_sys.tail_weight_bound(PotentialSpec(0.2, s=0.0)) == math.inf


def test_eval_map_left_matches_eval_map(par, rng):
    xs = rng.uniform(0.0, 0.5, 50)
    assert np.allclose(eval_map_left(par, xs), eval_map(par, xs, branch="L"),
                       atol=1e-15)
