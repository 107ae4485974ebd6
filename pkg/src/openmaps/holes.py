"""Hole descriptions and the combinatorics they induce.

Two kinds of holes are supported.  A Markov hole is a union of cells of the
depth-N0 partition refined by the renewal cells, so its boundary points are
cylinder endpoints and the open system stays Markov.  An interval-hole
family is a nested family of intervals of prescribed widths shrinking to a
common point, used for stability studies.

The non-swallowing check follows the combinatorial definition: build the
partition of the surviving part of Y = [1/2, 1] generated by the images of
the surviving first-return pieces, form the reachability digraph of those
atoms under the open return map, and require strong connectivity together
with gcd 1 over the return-time weights of its cycles.  On top of that,
return branches adjacent to 1/2 beyond the hole's deepest cell must keep a
surviving piece with an image of positive length; this is checked up to a
finite horizon and the horizon is reported, never hidden.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .map_core import (DomainError, MapParams, cylinder_realize,
                       renewal_endpoints, renewal_word)
from .induced import InducedSystem, eval_map_left

ENDPOINT_TOL = 1e-12
# forward block evaluation of deep-branch endpoints carries rounding noise
# amplified by the return derivative; genuine cell endpoints at workable
# depths are separated by far more than this
ATOM_TOL = 1e-9
MIN_ATOM = 1e-12


# -- hole types ------------------------------------------------------------


@dataclass(frozen=True)
class MarkovHole:
    """Union of depth-N0 partition cells.  Cell identifiers are binary
    itinerary words of length N0 over {L, R} (the all-L word is excluded:
    that cell contains the neutral point and is refined by renewal cells
    instead) or "J<k>" with k >= N0 for the renewal cell of index k."""

    N0: int
    cells: tuple[str, ...]
    intervals: tuple[tuple[float, float], ...]

    @property
    def max_cell_index(self) -> int:
        """Deepest renewal index named by a J-cell; 0 when only word cells
        are present (those stay away from the neutral point)."""
        deepest = 0
        for c in self.cells:
            if c.startswith("J"):
                deepest = max(deepest, int(c[1:]))
        return deepest


@dataclass(frozen=True)
class IntervalHoleFamily:
    """Nested intervals of given widths around a common center."""

    z: float
    widths: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...]

    def member(self, eps: float) -> tuple[float, float]:
        for w, iv in zip(self.widths, self.intervals):
            if abs(w - eps) <= 1e-15:
                return iv
        raise DomainError(f"width {eps} is not part of the family")


def _valid_word(word: str, N0: int) -> bool:
    return (len(word) == N0 and set(word) <= {"L", "R"}
            and word != "L" * N0)


def build_markov_hole(params: MapParams, N0: int, cells) -> MarkovHole:
    if N0 < 1:
        raise DomainError("partition depth N0 must be >= 1")
    cells = tuple(dict.fromkeys(str(c) for c in cells))
    if not cells:
        raise DomainError("a hole needs at least one cell")
    pieces = []
    deepest_j = 0
    for c in cells:
        if c.startswith("J") and c[1:].isdigit():
            k = int(c[1:])
            if k < N0:
                raise DomainError(
                    f"renewal cell {c} is shallower than the partition "
                    f"depth {N0}; name it by its itinerary word instead")
            deepest_j = max(deepest_j, k)
        elif not _valid_word(c, N0):
            raise DomainError(f"invalid cell identifier {c!r} at depth {N0}")
    ell = renewal_endpoints(params, max(deepest_j + 1, N0) + 1).ell
    for c in cells:
        if c.startswith("J") and c[1:].isdigit():
            k = int(c[1:])
            pieces.append((float(ell[k]), float(ell[k - 1])))
        else:
            cyl = cylinder_realize(params, c)
            pieces.append((cyl.lo, cyl.hi))
    pieces.sort()
    merged = [list(pieces[0])]
    for a, b in pieces[1:]:
        if a <= merged[-1][1] + ENDPOINT_TOL:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    total = sum(b - a for a, b in merged)
    if total >= 1.0 - 1e-9:
        raise DomainError("the hole cannot be the whole space")
    return MarkovHole(N0, cells, tuple((a, b) for a, b in merged))


def build_interval_family(z: float, widths) -> IntervalHoleFamily:
    widths = tuple(float(w) for w in widths)
    if not widths or any(w <= 0 for w in widths):
        raise DomainError("widths must be positive")
    if any(a <= b for a, b in zip(widths, widths[1:])):
        raise DomainError("widths must be strictly decreasing")
    if not 0.0 < z <= 1.0:
        raise DomainError("center must lie in (0, 1]")
    intervals = []
    for w in widths:
        if z >= 1.0 - 1e-15:
            lo, hi = 1.0 - w, 1.0
        else:
            lo, hi = z - w / 2.0, z + w / 2.0
            if lo < 0.0 or hi > 1.0:
                raise DomainError(
                    f"width {w} does not fit inside [0, 1] around {z}")
        intervals.append((lo, hi))
    return IntervalHoleFamily(z, widths, tuple(intervals))


# -- swallowing classification ---------------------------------------------


@dataclass(frozen=True)
class SwallowingReport:
    case: str
    swallowing: bool
    annotation: str
    components: tuple[tuple[str, tuple[float, float]], ...] = ()
    rates: tuple[tuple[str, str], ...] = ()


def _covers_full_renewal_cell(params, lo, hi, depth=4000):
    """Does (lo, hi) contain some whole cell [ell_m, ell_{m-1}]?"""
    if hi > 0.5 + ENDPOINT_TOL or lo <= 0.0:
        raise DomainError("expected an interior interval left of 1/2")
    ell = renewal_endpoints(params, depth).ell
    if lo < ell[-1]:
        raise DomainError("interval extends below the resolved renewal depth")
    # deepest cell whose closure meets (lo, hi): first index with ell <= lo
    m_hi = int(np.searchsorted(-ell, -hi, side="right"))  # first ell < hi
    m_lo = int(np.searchsorted(-ell, -lo, side="left"))
    for m in range(max(m_hi, 1), m_lo + 1):
        if lo <= ell[m] and ell[m - 1] <= hi:
            return True
    return False


def classify_swallowing(params: MapParams, hole) -> SwallowingReport:
    """Decision tree for a single-interval hole.

    The labels case-1 .. case-5 order the tree from holes covering the
    neutral point to holes strictly inside (1/2, 1) whose right remainder
    is dynamically isolated; anything that falls through is a candidate for
    the combinatorial non-swallowing check."""
    if hasattr(hole, "intervals"):
        comps = tuple(hole.intervals)
        if len(comps) != 1:
            raise DomainError("classification supports single intervals only; "
                              "multi-component holes are out of scope here")
        lo, hi = comps[0]
    else:
        lo, hi = (float(hole[0]), float(hole[1]))
    if not 0.0 <= lo < hi <= 1.0:
        raise DomainError("hole must be a nonempty subinterval of [0, 1]")

    if lo <= ENDPOINT_TOL:
        return SwallowingReport(
            "case-1", True,
            "hole covers the neutral fixed point; the surviving dynamics "
            "is uniformly hyperbolic and classical escape theory applies",
            rates=(("overall", "spectral gap of the hyperbolic remainder"),))
    if hi >= 1.0 - ENDPOINT_TOL and lo <= 0.5 + ENDPOINT_TOL:
        return SwallowingReport(
            "case-2", True,
            "one left branch remains; mass rides the renewal conveyor into "
            "the hole and the escape rate equals the closed pressure",
            components=(("L", (0.0, lo)),),
            rates=(("overall", "p(t)"),))
    if hi <= 0.5 + ENDPOINT_TOL:
        if _covers_full_renewal_cell(params, lo, hi):
            return SwallowingReport(
                "case-3", True,
                "hole blocks the conveyor by covering a full renewal cell; "
                "the system splits into a tail-dominated left component and "
                "a hyperbolic right component that leaks left",
                components=(("L", (0.0, lo)), ("R", (hi, 1.0))),
                rates=(("L", "p(t)"),
                       ("R", "p(t) - pH_R(t), hyperbolic open system")))
        return SwallowingReport(
            "non-swallowing-candidate", False,
            "interior hole left of 1/2 covering no full renewal cell; "
            "run the combinatorial check for a certificate")
    if abs(lo - 0.5) <= ENDPOINT_TOL:
        return SwallowingReport(
            "case-4", True,
            "hole opens at 1/2, so deep returns die and [f(hi), 1] absorbs "
            "the survivors; left component leaks into the hyperbolic right",
            components=(("L", (0.0, 2.0 * hi - 1.0)),
                        ("R", (2.0 * hi - 1.0, 1.0))),
            rates=(("L", "p(t)"),
                   ("R", "p(t) - pH_R(t), hyperbolic open system")))
    if lo < 0.5:
        # interval straddling 1/2: the right part already opens at 1/2
        return SwallowingReport(
            "case-4", True,
            "hole straddles 1/2; combination of a conveyor gap and an "
            "opening at 1/2, slowest component dominates",
            components=(("L", (0.0, lo)), ("R", (2.0 * hi - 1.0, 1.0))),
            rates=(("L", "p(t)"),
                   ("R", "p(t) - pH_R(t), hyperbolic open system")))
    if hi >= 1.0 - ENDPOINT_TOL:
        return SwallowingReport(
            "non-swallowing-candidate", False,
            "hole is a right edge piece of Y; branches near 1/2 survive "
            "untouched, run the combinatorial check for a certificate")
    if 2.0 * hi - 1.0 >= lo - ENDPOINT_TOL:
        return SwallowingReport(
            "case-5", True,
            "right remainder [hi, 1] maps into itself and the hole, never "
            "back left; the left component behaves as if the hole were "
            "(lo, 1] and the main theory applies to it",
            components=(("L", (0.0, lo)), ("R", (hi, 1.0))),
            rates=(("L", "p(t) - pH_L(t)"), ("R", "p(t) + t*log(2)")))
    return SwallowingReport(
        "non-swallowing-candidate", False,
        "interior hole in (1/2, 1) whose right remainder re-enters the "
        "left side; run the combinatorial check for a certificate")


# -- non-swallowing certificate --------------------------------------------


@dataclass(frozen=True)
class NonSwallowingReport:
    transitive: bool
    aperiodic: bool
    condition2_horizon: int
    verdict: str
    condition2_ok: bool
    atom_count: int
    return_gcd: int
    graph_period: int
    warnings: tuple[str, ...] = ()

    @property
    def non_swallowing(self) -> bool:
        return self.transitive and self.aperiodic and self.condition2_ok


def _branch_forward(sys: InducedSystem, k: int, x):
    """Image of x in branch k under the return map, by the forward block."""
    u = 2.0 * np.asarray(x, dtype=float) - 1.0
    for _ in range(k):
        u = eval_map_left(sys.params, u)
    return u


def _normalize_hole_arg(hole):
    if isinstance(hole, MarkovHole):
        return tuple(hole.intervals), hole.N0
    if hasattr(hole, "intervals"):
        return tuple(hole.intervals), 1
    hole = tuple(hole)
    if len(hole) == 2 and all(np.isscalar(c) for c in hole):
        return ((float(hole[0]), float(hole[1])),), 1
    return tuple((float(a), float(b)) for a, b in hole), 1


def _max_branch_index(params, intervals, cap=4000):
    """Deepest branch ladder index the hole touches: renewal cell of the
    left endpoint for components left of 1/2, return branch of the left
    endpoint for components inside Y."""
    ell = renewal_endpoints(params, cap).ell
    deepest = 0
    for a, b in intervals:
        u = a if a < 0.5 else 2.0 * a - 1.0
        if u >= 0.5:
            continue
        if u < ell[-1]:
            raise DomainError("hole reaches below the resolvable renewal depth")
        m = int(np.searchsorted(-ell, -u, side="left"))
        deepest = max(deepest, m)
    return deepest


def check_non_swallowing(params: MapParams, hole,
                         horizon: int | None = None) -> NonSwallowingReport:
    """Certificate for the combinatorial hole condition, to a horizon.

    Atoms are the intervals of Y cut out by the endpoints of all surviving
    return-piece images together with the hole edges; edges connect an atom
    to every atom its image under a surviving piece overlaps, weighted by
    the return time.  The verdict needs strong connectivity, gcd 1 among
    cycle return times, and surviving deep branches next to 1/2."""
    intervals, n0 = _normalize_hole_arg(hole)
    if horizon is None:
        horizon = 10 * max(n0, 1)
    if horizon < n0:
        raise DomainError("horizon must be at least the partition depth")
    warnings: list[str] = []

    if any(a <= ENDPOINT_TOL for a, _ in intervals):
        return NonSwallowingReport(
            True, True, 0, "uniformly-hyperbolic", False, 0, 0, 0,
            ("hole covers the neutral point; combinatorial machinery "
             "bypassed, classical hyperbolic escape theory applies",))

    max_idx = _max_branch_index(params, intervals)
    horizon_used = max(horizon, max_idx + 10)
    k_enum = horizon_used + max_idx + 2
    sys = InducedSystem(params, max(64, k_enum + 8), intervals)
    warnings.extend(sys.warnings)

    # condition (2): branches hugging 1/2 beyond the hole's deepest cell
    cond2 = True
    for k in range(max_idx + 1, horizon_used + 1):
        if k >= sys.n_max:
            break
        if not sys.branch(k).survives:
            cond2 = False
            warnings.append(
                f"return branch {k} next to 1/2 has no surviving piece")
            break

    # atoms of the image partition
    pieces = []
    for k in range(min(k_enum, sys.n_max)):
        for a, b in sys.branch(k).surviving():
            img = _branch_forward(sys, k, np.array([a, b]))
            qa = min(max(float(img[0]), 0.5), 1.0)
            qb = min(max(float(img[1]), 0.5), 1.0)
            pieces.append((k, a, b, qa, qb))
    cuts_in_y = [(a, b) for a, b in intervals if b > 0.5]
    ends = {0.5, 1.0}
    for _, _, _, qa, qb in pieces:
        ends.add(qa)
        ends.add(qb)
    for a, b in cuts_in_y:
        ends.add(max(a, 0.5))
        ends.add(min(b, 1.0))
    pts = sorted(ends)
    dedup = [pts[0]]
    for p in pts[1:]:
        if p - dedup[-1] > ATOM_TOL:
            dedup.append(p)
    atoms = []
    for a, b in zip(dedup, dedup[1:]):
        if b - a <= ATOM_TOL:
            continue
        mid = 0.5 * (a + b)
        if any(c <= mid <= d for c, d in cuts_in_y):
            continue
        atoms.append((a, b))
    n_atoms = len(atoms)
    if n_atoms == 0:
        return NonSwallowingReport(
            False, False, horizon_used, "swallowing", cond2, 0, 0, 0,
            tuple(warnings + ["no surviving atoms in Y"]))
    atom_lo = np.array([a for a, _ in atoms])
    atom_hi = np.array([b for _, b in atoms])

    def overlapping(lo, hi):
        out = []
        for i in range(n_atoms):
            if min(hi, atom_hi[i]) - max(lo, atom_lo[i]) > ATOM_TOL:
                out.append(i)
        return out

    edges: set[tuple[int, int, int]] = set()
    for k, a, b, _, _ in pieces:
        for i in overlapping(a, b):
            seg = (max(a, atom_lo[i]), min(b, atom_hi[i]))
            img = _branch_forward(sys, k, np.array(seg))
            for j in overlapping(float(img[0]), float(img[1])):
                edges.add((i, j, k + 1))

    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    graph = csr_matrix((np.ones(len(edges)), (rows, cols)),
                       shape=(n_atoms, n_atoms))
    n_comp, _ = connected_components(graph, directed=True,
                                     connection="strong")
    transitive = n_comp == 1

    return_gcd = 0
    graph_period = 0
    if transitive:
        return_gcd = _cycle_gcd(n_atoms, edges, weighted=True)
        graph_period = _cycle_gcd(n_atoms, edges, weighted=False)
    aperiodic = transitive and return_gcd == 1

    verdict = ("non-swallowing" if transitive and aperiodic and cond2
               else "swallowing")
    return NonSwallowingReport(transitive, aperiodic, horizon_used, verdict,
                               cond2, n_atoms, return_gcd, graph_period,
                               tuple(warnings))


def _cycle_gcd(n, edges, weighted=True):
    """gcd of all closed-walk weights of a strongly connected multigraph,
    via potentials along a spanning tree."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for u, v, w in edges:
        adj[u].append((v, w if weighted else 1))
    pot = [None] * n
    pot[0] = 0
    stack = [0]
    g = 0
    while stack:
        u = stack.pop()
        for v, w in adj[u]:
            if pot[v] is None:
                pot[v] = pot[u] + w
                stack.append(v)
            else:
                g = math.gcd(g, pot[u] + w - pot[v])
    return abs(g)


# -- assumption on second-iterate images -------------------------------------


@dataclass(frozen=True)
class SecondIterateReport:
    min_image_length: float
    argmin: tuple[float, str]
    branches_enumerated: int
    per_width: tuple[tuple[float, float], ...]


def check_assumption_H(params: MapParams, family: IntervalHoleFamily,
                       N_max: int = 200) -> SecondIterateReport:
    """Infimum over the family of the image lengths of the smoothness
    pieces of the second iterate of the open return map.

    Returns 0 outright when the family center sits on a branch or renewal
    endpoint: shrinking the hole then pinches a piece against that
    endpoint and the infimum over widths vanishes."""
    part = renewal_endpoints(params, N_max + 1)
    sys0 = InducedSystem(params, max(64, N_max + 8))
    z = family.z
    special = set(part.ell.tolist())
    special.update(sys0.branch_lo.tolist())
    special.update(sys0.branch_hi.tolist())
    special.add(1.0)
    if any(abs(z - e) <= 1e-13 for e in special):
        return SecondIterateReport(0.0, (0.0, "center on a cell endpoint"),
                                   N_max, ())

    overall = math.inf
    arg = (0.0, "")
    per_width = []
    for eps in (0.0,) + family.widths:
        intervals = () if eps == 0.0 else (family.member(eps),)
        sys = InducedSystem(params, max(64, N_max + 8), intervals)
        # second-leg images of every surviving piece, computed once; a
        # first leg with full image (the overwhelming majority) meets each
        # of these pieces whole
        piece_imgs: list[list[tuple[float, float, float, float]]] = []
        min_full = math.inf
        full_desc = ""
        for j in range(N_max):
            entries = []
            for c, d in sys.branch(j).surviving():
                r0, r1 = _branch_forward(sys, j, np.array([c, d]))
                entries.append((c, d, float(r0), float(r1)))
                if r1 - r0 < min_full:
                    min_full = float(r1 - r0)
                    full_desc = f"full first leg, piece of branch {j}"
            piece_imgs.append(entries)
        best = math.inf
        best_desc = ""
        for i in range(N_max):
            lo_i, hi_i = sys.branch_lo[i], sys.branch_hi[i]
            for a, b in sys.branch(i).surviving():
                full = (abs(a - lo_i) <= ENDPOINT_TOL
                        and abs(b - hi_i) <= ENDPOINT_TOL)
                if full:
                    if min_full < best:
                        best, best_desc = min_full, full_desc
                    continue
                qa, qb = _branch_forward(sys, i, np.array([a, b]))
                qa, qb = float(qa), float(qb)
                for j in range(N_max):
                    if min(qb, sys.branch_hi[j]) - max(qa, sys.branch_lo[j]) \
                            <= ATOM_TOL:
                        continue
                    for c, d, r0, r1 in piece_imgs[j]:
                        t0, t1 = max(qa, c), min(qb, d)
                        if t1 - t0 <= ATOM_TOL:
                            continue
                        if t0 <= c + ENDPOINT_TOL and t1 >= d - ENDPOINT_TOL:
                            length = r1 - r0
                        else:
                            s0, s1 = _branch_forward(sys, j,
                                                     np.array([t0, t1]))
                            length = float(s1 - s0)
                        if length < best:
                            best = length
                            best_desc = f"branches ({i}, {j})"
        per_width.append((eps, best))
        if best < overall:
            overall = best
            arg = (eps, best_desc)
    return SecondIterateReport(float(overall), arg, N_max, tuple(per_width))


# -- serialization -----------------------------------------------------------


def hole_to_json(hole) -> dict:
    if isinstance(hole, MarkovHole):
        return {"type": "markov", "N0": hole.N0, "cells": list(hole.cells)}
    if isinstance(hole, IntervalHoleFamily):
        return {"type": "interval", "z": hole.z,
                "epsilons": list(hole.widths)}
    raise DomainError(f"cannot serialize {type(hole).__name__}")


def hole_from_json(params: MapParams, data) -> MarkovHole | IntervalHoleFamily:
    if isinstance(data, str):
        with open(data) as fh:
            data = json.load(fh)
    kind = data.get("type")
    if kind == "markov":
        return build_markov_hole(params, int(data["N0"]), data["cells"])
    if kind == "interval":
        return build_interval_family(float(data["z"]), data["epsilons"])
    raise DomainError(f"unknown hole type {kind!r}")
