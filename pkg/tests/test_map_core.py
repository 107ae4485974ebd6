import math

import numpy as np
import pytest

from openmaps import MapParams, DomainError, EmptyCylinderError
from openmaps.map_core import (birkhoff_log_deriv, cylinder_realize,
                               distortion_estimate, eval_deriv, eval_map,
                               fit_distortion_constant, inverse_branch,
                               iterate_word, left_inverse, renewal_endpoints,
                               renewal_word)


def test_params_validation():
    with pytest.raises(DomainError):
        MapParams(0.0)
    with pytest.raises(DomainError):
        MapParams(1.5)
    with pytest.raises(DomainError):
        MapParams(float("nan"))
    assert MapParams(1.0).gamma == 1.0


def test_fixed_points_and_branch_values(par):
    assert eval_map(par, 0.0) == 0.0
    assert eval_map(par, 1.0) == 1.0
    # left branch carries [0, 1/2] onto [0, 1]: at 1/2 the bracket is
    # 1 + 2^g (1/2)^g = 2 for every gamma
    assert eval_map(par, 0.5, branch="L") == pytest.approx(1.0, abs=1e-15)
    assert eval_map(par, 0.5, branch="R") == pytest.approx(0.0, abs=1e-15)
    assert eval_map(par, 0.75) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        eval_map(par, 1.2)


def test_derivative_values(par):
    assert eval_deriv(par, 0.0) == 1.0
    assert eval_deriv(par, 0.9) == 2.0
    assert eval_deriv(par, 0.5, branch="L") == pytest.approx(2.0 + par.gamma)
    x = np.linspace(0.0, 0.5, 64)
    d = eval_deriv(par, x, branch="L")
    assert np.all(np.diff(d) > 0) and d[0] == 1.0


def test_left_inverse_roundtrip(par, rng):
    y = rng.uniform(0.0, 1.0, 257)
    u = left_inverse(par, y)
    assert np.all((0.0 <= u) & (u <= 0.5))
    assert np.max(np.abs(eval_map(par, u, branch="L") - y)) < 1e-12
    assert left_inverse(par, 1.0) == pytest.approx(0.5, abs=1e-14)
    assert left_inverse(par, 0.0) == 0.0


def test_inverse_branch_right(par):
    assert inverse_branch(par, "R", 0.0) == 0.5
    assert inverse_branch(par, "R", 1.0) == 1.0
    with pytest.raises(DomainError):
        inverse_branch(par, "X", 0.3)


def test_renewal_recursion(par):
    part = renewal_endpoints(par, 60)
    ell = part.ell
    assert ell[0] == 0.5
    assert np.all(np.diff(ell) < 0)
    # each endpoint steps up one cell under the left branch
    up = eval_map(par, ell[1:], branch="L")
    assert np.max(np.abs(up - ell[:-1])) < 1e-12
    # polynomial approach to the neutral point: ell_n ~ const * n^(-1/g)
    n = np.arange(40, 61)
    scaled = ell[40:61] * n ** (1.0 / par.gamma)
    assert np.ptp(scaled) / np.mean(scaled) < 0.05


def test_renewal_cells_are_cylinders(par):
    part = renewal_endpoints(par, 12)
    for n in (1, 2, 5, 12):
        cyl = cylinder_realize(par, renewal_word(n))
        lo, hi = part.cell(n)
        assert cyl.lo == pytest.approx(lo, abs=1e-12)
        assert cyl.hi == pytest.approx(hi, abs=1e-12)
    assert renewal_word(3) == "LLLR"


def test_cylinder_basics(par):
    assert cylinder_realize(par, "R").interval == (0.5, 1.0)
    assert cylinder_realize(par, "RR").interval == (0.75, 1.0)
    assert cylinder_realize(par, "RL").interval == (0.5, 0.75)
    outer = cylinder_realize(par, "RLR")
    inner = cylinder_realize(par, "RLRL")
    assert outer.lo <= inner.lo and inner.hi <= outer.hi
    with pytest.raises(EmptyCylinderError):
        cylinder_realize(par, "RRLRL", hole_words=("RLR",))
    # factor check, not prefix check
    with pytest.raises(EmptyCylinderError):
        cylinder_realize(par, "LLRLR", hole_words=("RLR",))
    cylinder_realize(par, "LLRRL", hole_words=("RLR",))


def test_iterate_word_matches_eval(par):
    orbit = iterate_word(par, 0.7, "RLLR")
    assert orbit[0] == 0.7
    x = 0.7
    for k, sym in enumerate("RLLR"):
        x = eval_map(par, x, branch=sym)
        assert orbit[k + 1] == pytest.approx(x, abs=1e-15)


def test_birkhoff_on_right_branch_is_exact(par):
    # the affine branch has constant slope 2
    s = birkhoff_log_deriv(par, 0.96, 4, word="RRRR")
    assert s == pytest.approx(4 * math.log(2.0), abs=1e-14)


def test_birkhoff_against_cylinder_width(par):
    # width of a depth-n cylinder ~ |Df^n|^(-1) at an interior point,
    # up to distortion
    word = "RLRRL" * 3
    cyl = cylinder_realize(par, word)
    s = birkhoff_log_deriv(par, cyl.midpoint, len(word), word=word)
    assert abs(-math.log(cyl.width) - s) < 1.0


def test_distortion_quantities(par):
    d5 = distortion_estimate(par, 5, samples=64)
    assert 0.0 < d5 < 1.0
    fit = fit_distortion_constant(par, depth=60)
    assert fit.holder_exponent == pytest.approx(1.0 / 3.0)
    assert fit.holder_constant_aggregate == pytest.approx(
        fit.holder_constant / (1.0 - 2.0 ** (-fit.holder_exponent)))
    assert fit.growth_constant >= 1.0
