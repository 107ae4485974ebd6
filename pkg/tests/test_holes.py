import json

import numpy as np
import pytest

from openmaps import DomainError, MapParams
from openmaps.holes import (build_interval_family, build_markov_hole,
                            check_assumption_H, check_non_swallowing,
                            classify_swallowing, hole_from_json, hole_to_json)
from openmaps.map_core import cylinder_realize, renewal_endpoints


def test_markov_hole_is_the_cylinder(par, rlr_hole):
    assert rlr_hole.N0 == 3 and rlr_hole.cells == ("RLR",)
    (a, b), = rlr_hole.intervals
    cyl = cylinder_realize(par, "RLR")
    assert a == pytest.approx(cyl.lo, abs=1e-12)
    assert b == pytest.approx(cyl.hi, abs=1e-12)


def test_markov_holes_nest(par, rlr_hole):
    inner = build_markov_hole(par, 4, ["RLRL"])
    (a, b), = rlr_hole.intervals
    (c, d), = inner.intervals
    assert a - 1e-12 <= c and d <= b + 1e-12 and d - c < b - a


def test_adjacent_cells_merge(par):
    hole = build_markov_hole(par, 3, ["RLR", "RRL"])
    assert len(hole.intervals) == 1
    (a, b), = hole.intervals
    assert a == pytest.approx(cylinder_realize(par, "RLR").lo, abs=1e-12)
    assert b == pytest.approx(cylinder_realize(par, "RRL").hi, abs=1e-12)


def test_markov_hole_validation(par):
    with pytest.raises(DomainError):
        build_markov_hole(par, 1, ["L", "R"])
    with pytest.raises(DomainError):
        build_markov_hole(par, 3, ["RLX"])
    with pytest.raises(DomainError):
        build_markov_hole(par, 3, [])


def test_interval_family(par):
    fam = build_interval_family(0.7, (0.1, 0.05))
    assert fam.z == 0.7
    assert fam.member(0.1) == (pytest.approx(0.65), pytest.approx(0.75))
    assert fam.intervals[0] == fam.member(fam.widths[0])
    with pytest.raises(DomainError):
        build_interval_family(0.01, (0.1,))


def test_hole_json_roundtrip(par, rlr_hole, tmp_path):
    data = hole_to_json(rlr_hole)
    again = hole_from_json(par, data)
    assert again.intervals == rlr_hole.intervals
    fam = build_interval_family(0.7, (0.1, 0.05))
    fam2 = hole_from_json(par, hole_to_json(fam))
    assert fam2.intervals == fam.intervals
    path = tmp_path / "hole.json"
    path.write_text(json.dumps(data))
    assert hole_from_json(par, str(path)).intervals == rlr_hole.intervals
    with pytest.raises((DomainError, KeyError)):
        hole_from_json(par, {"type": "wedge"})


def test_classification_tree(par, rlr_hole):
    assert classify_swallowing(par, (0.0, 0.1)).case == "case-1"
    assert classify_swallowing(par, (0.4, 1.0)).case == "case-2"
    ell = renewal_endpoints(par, 3).ell
    covers_cell_1 = (ell[1] - 0.001, 0.5)
    assert classify_swallowing(par, covers_cell_1).case == "case-3"
    assert classify_swallowing(par, (0.5, 0.6)).case == "case-4"
    assert classify_swallowing(par, (0.45, 0.6)).case == "case-4"
    rep5 = classify_swallowing(par, (0.75, 0.875))
    assert rep5.case == "case-5"
    assert dict(rep5.rates)["R"] == "p(t) + t*log(2)"
    rep = classify_swallowing(par, rlr_hole)
    assert rep.case == "non-swallowing-candidate" and not rep.swallowing
    assert classify_swallowing(
        par, (0.9, 1.0)).case == "non-swallowing-candidate"


def test_non_swallowing_certificate(par, rlr_hole):
    rep = check_non_swallowing(par, rlr_hole)
    assert rep.transitive and rep.aperiodic
    assert rep.condition2_ok
    assert rep.non_swallowing and rep.verdict == "non-swallowing"


def test_assumption_h_endpoint_degeneracy(par):
    fam_bad = build_interval_family(0.75, (0.01, 0.005))
    rep = check_assumption_H(par, fam_bad, N_max=60)
    assert rep.min_image_length == 0.0
    fam_ok = build_interval_family(0.7, (0.01, 0.005))
    rep2 = check_assumption_H(par, fam_ok, N_max=60)
    assert rep2.min_image_length > 0.0
    assert len(rep2.per_width) == 2
