"""Discretized transfer operators and the measures they produce.

Two discretizations cooperate here.  The induced operator lives on Y =
[1/2, 1]: collocation on a grid graded toward 1/2 (where branch domains
accumulate), piecewise-linear interpolation, one dense nonnegative matrix.
Its leading left vector realizes the conformal measure on Y, the right
vector the invariant or conditionally invariant density of the return map.

The full-interval operator lives on an adaptive grid whose cells follow
the renewal partition near the neutral point; it is the two-preimage sparse
matrix of the original map and drives everything that needs actual escape
dynamics on I: pushforward iteration, the averaging scheme on the slow
side of the dimension threshold, and the t = 1 degeneracy diagnostic.

Escape mass itself is computed two independent ways: summing conformal
weights of surviving itinerary cylinders (with rigorous monotone error
bars) and integrating iterates of the full operator; the test suite holds
the two routes against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .map_core import (ConvergenceError, DomainError, MapParams, eval_deriv,
                       left_inverse, renewal_endpoints)
from .induced import (LOG2, InducedSystem, PotentialSpec, build_induced,
                      eval_map_left)
from . import pressure as _pressure

EIGEN_GATE = 2e-3
GAP_GATE = 0.95
M_DEFAULT = 512
K_RENEWAL = 400
L_MAX = 300
TAIL_THRESHOLD = 1e-6


def _hole_intervals(hole):
    if hole is None:
        return ()
    if hasattr(hole, "intervals"):
        return tuple(hole.intervals)
    hole = tuple(hole)
    if len(hole) == 2 and all(np.isscalar(c) for c in hole):
        return ((float(hole[0]), float(hole[1])),)
    return tuple((float(a), float(b)) for a, b in hole)


def _in_intervals(intervals, pts):
    pts = np.asarray(pts, dtype=float)
    out = np.zeros(pts.shape, dtype=bool)
    for a, b in intervals:
        out |= (pts > a) & (pts < b)
    return out


# -- induced operator --------------------------------------------------------


@dataclass
class DiscretizedOperator:
    sys: InducedSystem
    spec: PotentialSpec
    nodes: np.ndarray
    matrix: np.ndarray
    tail_bound: float
    warnings: tuple[str, ...] = ()
    _eigen: "SpectralData | None" = field(default=None, repr=False)


@dataclass
class SpectralData:
    lambda_: float
    right_vec: np.ndarray
    left_vec: np.ndarray
    residual: float
    gap_estimate: float
    iterations: int
    converged: bool


def collocation_grid(sys: InducedSystem, M: int = M_DEFAULT,
                     include=()) -> np.ndarray:
    """Grid on Y graded cubically toward 1/2, with the hole-cut endpoints
    and any requested points inserted."""
    if M < 64:
        raise DomainError("collocation grid needs M >= 64")
    u = np.linspace(0.0, 1.0, M)
    base = 0.5 + 0.5 * u ** 3          # dense near 1/2
    pts = set(np.concatenate([base, [0.5, 1.0]]).tolist())
    for k in range(sys.n_max):
        flat = sys._cuts[k]
        pts.update(flat.tolist())
    pts.update(float(p) for p in include)
    arr = np.array(sorted(p for p in pts if 0.5 <= p <= 1.0))
    keep = np.concatenate([[True], np.diff(arr) > 1e-13])
    return arr[keep]


def assemble(sys: InducedSystem, spec: PotentialSpec, M: int = M_DEFAULT,
             grid: np.ndarray | None = None,
             strict_tail: bool = True) -> DiscretizedOperator:
    """Collocation matrix of the induced transfer operator: row i sums the
    branch preimages of node i with their potential weights, composed with
    linear interpolation back onto the grid."""
    nodes = collocation_grid(sys, M) if grid is None else np.asarray(grid)
    m = len(nodes)
    xi, logdf = sys.chains(nodes)
    tail = sys.tail_weight_bound(spec)
    warnings = []
    if not math.isfinite(tail) or tail > TAIL_THRESHOLD:
        msg = (f"branch truncation tail {tail:.2e} above threshold "
               f"{TAIL_THRESHOLD:.0e} for {spec}")
        if strict_tail:
            raise DomainError(msg)
        warnings.append(msg)
    A = np.zeros((m, m))
    rows = np.arange(m)
    for k in range(sys.n_max):
        w = np.exp(-spec.t * logdf[k] - spec.s * (k + 1) + spec.shift)
        if spec.punctured:
            w = np.where(sys.in_cut(k, xi[k]), 0.0, w)
        if not np.any(w > 0.0):
            continue
        idx = np.clip(np.searchsorted(nodes, xi[k]), 1, m - 1)
        lam = (xi[k] - nodes[idx - 1]) / (nodes[idx] - nodes[idx - 1])
        # one entry per row within a branch, so fancy += cannot collide
        A[rows, idx - 1] += w * (1.0 - lam)
        A[rows, idx] += w * lam
    return DiscretizedOperator(sys, spec, nodes, A, tail, tuple(warnings))


def leading_eigen(op: DiscretizedOperator, tol: float = 1e-13,
                  max_iter: int = 5000, seed: int = 0) -> SpectralData:
    """Leading eigendata by power iteration on both sides; the right vector
    is normalized to integral one against the left (measure) vector."""
    if op._eigen is not None:
        return op._eigen
    A = op.matrix
    m = A.shape[0]
    rng = np.random.default_rng(seed)
    v = np.ones(m) + 0.01 * rng.random(m)
    u = np.ones(m) + 0.01 * rng.random(m)
    lam = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        av = A @ v
        au = A.T @ u
        nav, nau = np.sum(np.abs(av)), np.sum(np.abs(au))
        if nav <= 0.0 or nau <= 0.0:
            raise ConvergenceError("operator annihilates the iteration seed")
        lam_new = float(nav / np.sum(np.abs(v)))
        v = av / nav
        u = au / nau
        if abs(lam_new - lam) < tol * max(1.0, abs(lam_new)):
            lam = lam_new
            converged = True
            break
        lam = lam_new
    v = np.abs(v)
    u = np.abs(u)
    u /= u.sum()
    scale = float(u @ v)
    if scale <= 0.0:
        raise ConvergenceError("degenerate eigenvector pairing")
    v = v / scale
    residual = float(np.sum(np.abs(A @ v - lam * v)))

    # deflated iteration for a second-eigenvalue estimate
    w = rng.standard_normal(m)
    w -= v * (u @ w) / (u @ v)
    growth = 0.0
    for _ in range(200):
        w = A @ w - lam * v * (u @ w) / (u @ v)
        nw = float(np.max(np.abs(w)))
        if nw == 0.0:
            break
        growth = nw
        w /= nw
    gap = growth / lam if lam > 0 else math.inf
    data = SpectralData(lam, v, u, residual, gap, it, converged)
    op._eigen = data
    return data


def conformal_weights(op: DiscretizedOperator) -> np.ndarray:
    """Left eigenvector as a probability vector over grid nodes; for the
    closed normalized potential this realizes the conformal measure on Y."""
    return leading_eigen(op).left_vec


def branch_mass_profile(op: DiscretizedOperator, n_lo: int, n_hi: int):
    """Measure of each return branch under the left vector, for tail-decay
    slope checks."""
    u = conformal_weights(op)
    sys = op.sys
    ns = np.arange(n_lo, n_hi + 1)
    masses = np.empty(len(ns), dtype=float)
    for i, n in enumerate(ns):
        k = n - 1
        sel = (op.nodes >= sys.branch_lo[k]) & (op.nodes < sys.branch_hi[k])
        masses[i] = float(u[sel].sum())
    return ns, masses


def operator_root(sys: InducedSystem, t: float, s0: float,
                  punctured: bool = True, M: int = M_DEFAULT,
                  tol: float = 1e-9, max_iter: int = 12,
                  grid: np.ndarray | None = None) -> float:
    """Refine s until the collocation operator's leading eigenvalue is 1.

    Secant iteration on log lambda(s), seeded by a cycle-sum root.  The
    eigenvalue is stable to the discretization well below the cycle
    estimator's truncation bias, so this is the sharp tool for single
    roots; log lambda is close to linear in s with slope near minus the
    mean return time, and a handful of steps reaches rounding level."""
    def loglam(s):
        op = assemble(sys, PotentialSpec(t, s, punctured), M, grid=grid,
                      strict_tail=False)
        return math.log(leading_eigen(op).lambda_)

    f0 = loglam(s0)
    if abs(f0) < tol:
        return s0
    s1 = s0 + f0 / 2.5
    f1 = loglam(s1)
    for _ in range(max_iter):
        if abs(f1) < tol or f1 == f0:
            break
        s0, s1 = s1, s1 - f1 * (s1 - s0) / (f1 - f0)
        f0, f1 = f1, loglam(s1)
    if abs(f1) > 1e-6:
        raise ConvergenceError(
            f"eigenvalue root polish stalled at |log lambda| = {abs(f1):.2e}")
    return s1


# -- adaptive grid on the whole interval -------------------------------------


def interval_grid(params: MapParams, hole_intervals=(), K: int = K_RENEWAL,
                  m_y: int = 256) -> np.ndarray:
    """Cell edges on [0, 1]: one lump cell below the K-th renewal point,
    renewal cells subdivided to the uniform target width, a uniform part on
    Y, and the hole endpoints inserted exactly."""
    part = renewal_endpoints(params, K)
    h0 = 0.5 / m_y
    edges = {0.0, 1.0}
    ell = part.ell
    edges.update(ell.tolist())
    for k in range(1, K + 1):
        a, b = ell[k], ell[k - 1]
        extra = int((b - a) / h0)
        if extra > 1:
            edges.update(np.linspace(a, b, extra + 1).tolist())
    edges.update(np.linspace(0.5, 1.0, m_y + 1).tolist())
    for a, b in hole_intervals:
        edges.add(float(a))
        edges.add(float(b))
    arr = np.array(sorted(edges))
    keep = np.concatenate([[True], np.diff(arr) > 1e-13])
    return arr[keep]


def full_operator(params: MapParams, edges: np.ndarray, t: float,
                  p_t: float, hole_intervals=(),
                  punctured: bool = True) -> sparse.csr_matrix:
    """Sparse collocation matrix of the interval-map transfer operator with
    potential t*phi - p_t at the grid nodes (= cell edges): each node has a
    left-branch and a right-branch preimage, each interpolated linearly."""
    x = np.asarray(edges)
    m = len(x)
    rows, cols, vals = [], [], []
    pre_left = left_inverse(params, x)
    pre_right = (x + 1.0) / 2.0
    for pre in (pre_left, pre_right):
        w = np.exp(-t * np.log(eval_deriv(params, pre)) - p_t)
        if punctured and hole_intervals:
            w = np.where(_in_intervals(hole_intervals, pre), 0.0, w)
        idx = np.clip(np.searchsorted(x, pre), 1, m - 1)
        lam = (pre - x[idx - 1]) / (x[idx] - x[idx - 1])
        rows.extend([np.arange(m), np.arange(m)])
        cols.extend([idx - 1, idx])
        vals.extend([w * (1.0 - lam), w * lam])
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m))
    return mat


_REF_CACHE: dict = {}


def reference_masses(params: MapParams, edges: np.ndarray, t: float,
                     p_t: float, M: int = M_DEFAULT) -> np.ndarray:
    """Conformal measure of each grid cell, total mass one.

    Cells inside Y integrate the left eigenvector of the closed normalized
    induced operator (assembled on a grid containing these cell edges, so
    no cell is skipped over).  A cell inside renewal level k is pushed
    forward k steps into Y and weighted by the conformal Jacobian at the
    image midpoint.  The lump cell below the resolved depth takes the
    leftover mass."""
    key = (params.gamma, round(t, 12), round(p_t, 12), len(edges),
           float(edges[1]), float(edges[-2]))
    hit = _REF_CACHE.get(key)
    if hit is not None:
        return hit
    sys = build_induced(params, n_max=800)
    spec = PotentialSpec(t, p_t)
    y_edges = edges[edges >= 0.5]
    grid = collocation_grid(sys, M, include=y_edges.tolist())
    op = assemble(sys, spec, grid=grid, strict_tail=False)
    data = leading_eigen(op)
    if abs(data.lambda_ - 1.0) > 5e-3:
        raise ConvergenceError(
            f"closed normalized operator has eigenvalue {data.lambda_:.6f}; "
            "p_t is inconsistent with the discretization")
    u = data.left_vec
    nodes = op.nodes
    # dual cells of the collocation nodes carry the node masses; cumulative
    # mass then evaluates at arbitrary points of Y
    dual = np.empty(len(nodes) + 1)
    dual[1:-1] = 0.5 * (nodes[1:] + nodes[:-1])
    dual[0], dual[-1] = nodes[0], nodes[-1]

    def cum(pts):
        pts = np.asarray(pts, dtype=float)
        frac = np.clip((pts[:, None] - dual[:-1]) / (dual[1:] - dual[:-1]),
                       0.0, 1.0)
        return frac @ u

    masses = np.zeros(len(edges) - 1)
    in_y = edges[:-1] >= 0.5
    lo_y = edges[:-1][in_y]
    hi_y = edges[1:][in_y]
    masses[in_y] = cum(hi_y) - cum(lo_y)

    # renewal cells: push forward to Y level by level; the grid keeps every
    # cell inside a single level, so the level of the left edge is the level
    # of the cell
    part = renewal_endpoints(params, 4000)
    ell = part.ell
    j_sel = np.where(~in_y & (edges[:-1] > 0.0))[0]
    if len(j_sel):
        lo = edges[j_sel]
        hi = edges[j_sel + 1]
        lev = np.searchsorted(-ell, -lo, side="left")
        mid = 0.5 * (lo + hi)
        fl, fh, fm = lo.copy(), hi.copy(), mid.copy()
        acc = np.zeros(len(j_sel))
        remaining = lev.copy()
        for _ in range(int(lev.max())):
            act = remaining > 0
            if not np.any(act):
                break
            acc[act] += np.log(eval_deriv(params, fm[act], branch="L"))
            fl[act] = eval_map_left(params, fl[act])
            fh[act] = eval_map_left(params, fh[act])
            fm[act] = eval_map_left(params, fm[act])
            remaining[act] -= 1
        base = cum(np.minimum(fh, 1.0)) - cum(np.maximum(fl, 0.5))
        masses[j_sel] = base * np.exp(-t * acc - lev * p_t)

    # the left vector is a probability on Y, so the raw total is 1/m_t(Y);
    # rescaling normalizes the whole partition, with the unresolved tail
    # below the deepest renewal edge absorbed proportionally (it is orders
    # of magnitude below the tolerances used downstream)
    total = float(masses.sum())
    if not 1.0 - 1e-9 < total < 100.0:
        raise ConvergenceError(f"reference mass accumulation broke: {total}")
    masses /= total
    _REF_CACHE[key] = masses
    return masses


def integrate(values: np.ndarray, masses: np.ndarray,
              cell_mask: np.ndarray | None = None) -> float:
    """Trapezoid-style integral of node values against cell masses."""
    cell_vals = 0.5 * (values[1:] + values[:-1])
    if cell_mask is not None:
        cell_vals = cell_vals * cell_mask
    return float(np.sum(cell_vals * masses))


def _off_hole_cells(edges: np.ndarray, intervals) -> np.ndarray:
    """Cells outside the hole; hole endpoints are grid edges, so no cell
    straddles the boundary."""
    mid = 0.5 * (edges[1:] + edges[:-1])
    return ~_in_intervals(intervals, mid)


# -- escape mass through surviving cylinders ---------------------------------


@dataclass
class EscapeMass:
    n: np.ndarray
    mass: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    slope: float
    slope_window: tuple[int, int]
    depth: int
    p_t: float


def _hole_patterns(hole):
    """Markov hole cells as (length, packed-bit) itinerary patterns."""
    if not hasattr(hole, "cells"):
        raise DomainError(
            "cylinder escape needs a Markov hole; interval holes are served "
            "by the operator route")
    pats = []
    for c in hole.cells:
        word = ("L" * int(c[1:]) + "R") if c.startswith("J") else c
        bits = 0
        for ch in word:
            bits = (bits << 1) | (1 if ch == "R" else 0)
        pats.append((len(word), bits))
    return pats


def escape_mass(params: MapParams, hole, t: float, n: int,
                p_t: float | None = None, depth: int | None = None,
                max_depth: int = 25) -> EscapeMass:
    """Conformal mass still outside the hole after 0..n steps, from
    itinerary cylinders.

    Cylinders are grown one symbol at a time; a cylinder is finalized the
    moment its earliest hole hit is known (later refinements can only
    reveal later hits), so the live front only carries genuinely
    undecided words.  Weights use that the cylinder weight function is
    monotone across each cylinder: evaluating the Birkhoff sum at the two
    endpoints gives hard upper and lower bars."""
    if hole is None:
        ns = np.arange(n + 1)
        ones = np.ones(n + 1)
        return EscapeMass(ns, ones, ones, ones, 0.0, (0, n), 0,
                          p_t if p_t is not None else 0.0)
    pats = _hole_patterns(hole)
    max_len = max(L for L, _ in pats)
    if depth is None:
        depth = n + max_len
    if depth > max_depth:
        raise DomainError(
            f"cylinder depth {depth} exceeds the budget {max_depth}")
    if depth < n + max_len:
        raise DomainError("depth too small to certify the requested range")
    if p_t is None:
        sys = build_induced(params, n_max=800)
        p_t = _pressure.closed_pressure(sys, t)

    NOHIT = np.iinfo(np.int32).max
    bits = np.zeros(1, dtype=np.uint64)
    pos_lo = np.zeros(1)
    pos_hi = np.ones(1)
    s_lo = np.zeros(1)
    s_hi = np.zeros(1)
    first_hit = np.full(1, NOHIT, dtype=np.int32)

    done = {"e": [], "s_lo": [], "s_hi": [], "d": []}

    def finalize(sel, d):
        done["e"].append(first_hit[sel])
        done["s_lo"].append(s_lo[sel])
        done["s_hi"].append(s_hi[sel])
        done["d"].append(np.full(int(sel.sum()), d))

    for d in range(1, depth + 1):
        # split: the new boundary z is the depth-(d-1) pullback of 1/2
        # through the word, and its Birkhoff sum accumulates for free
        # during the pullback; as an endpoint its orbit sits at 1/2 now
        count = len(bits)
        z_pos = np.full(count, 0.5)
        s_z = np.zeros(count)
        for i in range(d - 1):
            b = (bits >> np.uint64(i)) & np.uint64(1)
            is_r = b == 1
            z_pos = np.where(is_r, (z_pos + 1.0) / 2.0, z_pos)
            if np.any(~is_r):
                z_pos[~is_r] = left_inverse(params, z_pos[~is_r])
            s_z += np.log(eval_deriv(params, z_pos))
        boundary = np.full(count, 0.5)
        bits = np.concatenate([bits << np.uint64(1),
                               (bits << np.uint64(1)) | np.uint64(1)])
        pos_lo = np.concatenate([pos_lo, boundary])
        pos_hi = np.concatenate([boundary, pos_hi])
        s_lo = np.concatenate([s_lo, s_z])
        s_hi = np.concatenate([s_z, s_hi])
        first_hit = np.concatenate([first_hit, first_hit])

        # advance both endpoint orbits one step along the new symbol;
        # the branch is the symbol's, not the position's, so that boundary
        # orbits at 1/2 stay on the correct side
        half = len(bits) // 2
        for arr_s, arr_p in ((s_lo, pos_lo), (s_hi, pos_hi)):
            arr_s[:half] += np.log(
                eval_deriv(params, arr_p[:half], branch="L"))
            arr_s[half:] += LOG2
            arr_p[:half] = np.clip(eval_map_left(params, arr_p[:half]),
                                   0.0, 1.0)
            arr_p[half:] = np.clip(2.0 * arr_p[half:] - 1.0, 0.0, 1.0)

        # new window matches end exactly at the current depth
        for L, pat in pats:
            if d < L:
                continue
            mask = np.uint64((1 << L) - 1)
            hit = (bits & mask) == np.uint64(pat)
            j = d - L
            first_hit = np.where(hit & (first_hit == NOHIT), j, first_hit)
        decided = first_hit != NOHIT
        if np.any(decided):
            finalize(decided, d)
            keep = ~decided
            bits, pos_lo, pos_hi = bits[keep], pos_lo[keep], pos_hi[keep]
            s_lo, s_hi, first_hit = s_lo[keep], s_hi[keep], first_hit[keep]
        if len(bits) == 0:
            break

    if len(bits):
        finalize(np.ones(len(bits), dtype=bool), depth)
    e = np.concatenate(done["e"])
    sl = np.concatenate(done["s_lo"])
    sh = np.concatenate(done["s_hi"])
    dd = np.concatenate(done["d"])
    w_sup = np.exp(-t * sl - dd * p_t)
    w_inf = np.exp(-t * sh - dd * p_t)
    w_est = np.exp(-t * 0.5 * (sl + sh) - dd * p_t)

    ns = np.arange(n + 1)
    mass = np.empty(n + 1)
    lower = np.empty(n + 1)
    upper = np.empty(n + 1)
    for i, nn in enumerate(ns):
        alive = e > nn
        mass[i] = w_est[alive].sum()
        lower[i] = w_inf[alive].sum()
        upper[i] = w_sup[alive].sum()
    lo_w = max(1, n - max(2, n // 3))
    slope = float(np.polyfit(ns[lo_w:], np.log(mass[lo_w:]), 1)[0]) \
        if n >= 3 else 0.0
    return EscapeMass(ns, mass, lower, upper, slope, (lo_w, n), depth, p_t)


def operator_escape_mass(params: MapParams, hole, t: float, n: int,
                         p_t: float, edges: np.ndarray | None = None):
    """Escape mass from iterating the full punctured operator on constant
    one; the independent cross-check of the cylinder route."""
    intervals = _hole_intervals(hole)
    if edges is None:
        edges = interval_grid(params, intervals)
    mat = full_operator(params, edges, t, p_t, intervals, punctured=True)
    ref = reference_masses(params, edges, t, p_t)
    off = _off_hole_cells(edges, intervals)
    # the matrix kills preimages inside the hole, so iterate n applies the
    # survival condition at times 1..n; the time-0 condition enters through
    # the masked measurement
    psi = np.ones(len(edges))
    out = np.empty(n + 1)
    out[0] = integrate(psi, ref, off)
    for i in range(1, n + 1):
        psi = mat @ psi
        out[i] = integrate(psi, ref, off)
    return np.arange(n + 1), out


# -- densities on the interval ------------------------------------------------


@dataclass
class DensityOnI:
    edges: np.ndarray
    node_values: np.ndarray
    reference_weights: np.ndarray
    tail_level: int
    tail_bound: float

    def cell_values(self) -> np.ndarray:
        return 0.5 * (self.node_values[1:] + self.node_values[:-1])

    def integral(self) -> float:
        return integrate(self.node_values, self.reference_weights)

    def l1_distance(self, other: "DensityOnI") -> float:
        if len(other.edges) != len(self.edges) or \
                not np.allclose(other.edges, self.edges):
            raise DomainError("densities live on different grids")
        diff = np.abs(self.cell_values() - other.cell_values())
        return float(np.sum(diff * self.reference_weights))

    def csv_rows(self):
        vals = self.cell_values()
        for i in range(len(vals)):
            yield (float(self.edges[i]), float(self.edges[i + 1]),
                   float(vals[i]), float(self.reference_weights[i]))


@dataclass
class AccimResult:
    density: DensityOnI
    lambda_full: float
    p_t: float
    p_hole: float
    eigenvalue_gate: float
    gap_estimate: float
    density_on_y: SpectralData


def accim_on_I(params: MapParams, hole, t: float, L_max: int = L_MAX,
               M: int = M_DEFAULT, n_max: int = 800,
               p_t: float | None = None, p_h: float | None = None,
               edges: np.ndarray | None = None) -> AccimResult:
    """Conditionally invariant density in the spectral-gap regime.

    Solves the punctured induced eigenproblem at the normalized potential
    (its leading eigenvalue must come out as 1, a consistency gate), then
    projects the density from Y down the renewal levels: the value at x in
    level k sums the surviving pullback chains entering from Y, each
    weighted by its conformal Jacobian times the escape normalization per
    step."""
    intervals = _hole_intervals(hole)
    sys = InducedSystem(params, n_max, intervals)
    if p_t is None:
        p_t = _pressure.closed_pressure(sys, t)
    if p_h is None:
        ph = _pressure.punctured_pressure(sys, t)
        if ph.value <= 0.0:
            raise DomainError(
                "no positive punctured pressure: outside the spectral-gap "
                "regime, use the averaging scheme instead")
        p_h = ph.value
    lam_full = math.exp(p_h - p_t)

    op = assemble(sys, PotentialSpec(t, p_h, punctured=True), M,
                  strict_tail=False)
    data = leading_eigen(op)
    gate = abs(data.lambda_ - 1.0)
    if gate > EIGEN_GATE:
        # the cycle-sum root is only as good as its beam; polish it against
        # the operator itself, whose eigenvalue this projection relies on
        p_h = operator_root(sys, t, p_h, punctured=True, M=M)
        lam_full = math.exp(p_h - p_t)
        op = assemble(sys, PotentialSpec(t, p_h, punctured=True), M,
                      strict_tail=False)
        data = leading_eigen(op)
        gate = abs(data.lambda_ - 1.0)
        if gate > EIGEN_GATE:
            raise ConvergenceError(
                f"induced eigenvalue {data.lambda_:.6f} misses 1 by "
                f"{gate:.2e} (gate {EIGEN_GATE}); pressures and "
                "discretization disagree")

    if edges is None:
        edges = interval_grid(params, intervals)
    ref = reference_masses(params, edges, t, p_t)
    gbar = data.right_vec
    nodes = op.nodes

    vals = np.zeros(len(edges))
    in_y = edges >= 0.5
    vals[in_y] = np.interp(edges[in_y], nodes, gbar)

    left_comps = [(a, b) for a, b in intervals if a < 0.5]
    y_comps = [(a, b) for a, b in intervals if b > 0.5]
    sel = np.where(~in_y & (edges > 0.0))[0]
    if len(sel):
        x = edges[sel]
        w = x.copy()
        alive = ~_in_intervals(left_comps, x)
        acc = np.zeros(len(sel))       # running log Df along the chain
        total = np.zeros(len(sel))
        step_log = -p_h
        for ell in range(1, L_max + 1):
            v = (w + 1.0) / 2.0
            ok = alive & ~_in_intervals(y_comps, v)
            term = np.where(
                ok,
                np.interp(v, nodes, gbar)
                * np.exp(-t * (LOG2 + acc) + ell * step_log),
                0.0)
            total += term
            w = left_inverse(params, w)
            alive &= ~_in_intervals(left_comps, w)
            acc += np.log(eval_deriv(params, w, branch="L"))
            if not np.any(alive):
                break
        vals[sel] = total
    vals[_in_intervals(intervals, edges)] = 0.0
    tail_bound = math.exp(-L_max * p_h) * float(np.max(gbar))

    dens = DensityOnI(edges, vals, ref, L_max, tail_bound)
    scale = dens.integral()
    if scale <= 0:
        raise ConvergenceError("projected density integrated to zero")
    dens.node_values = vals / scale
    return AccimResult(dens, lam_full, p_t, p_h, gate, data.gap_estimate,
                       data)


def apply_full(params: MapParams, hole, t: float, p_t: float,
               density: DensityOnI) -> np.ndarray:
    """One application of the full punctured operator to a density's node
    values (for conditional-invariance residuals)."""
    intervals = _hole_intervals(hole)
    mat = full_operator(params, density.edges, t, p_t, intervals)
    return mat @ density.node_values


@dataclass
class AveragedResult:
    density: DensityOnI
    residual: float
    lambda_t: float
    n: int
    norm_history: np.ndarray


def averaged_accim(params: MapParams, hole, t: float, n: int,
                   p_t: float | None = None,
                   edges: np.ndarray | None = None) -> AveragedResult:
    """Weighted time average of full-operator iterates for parameters at or
    beyond the dimension threshold, where the plain iteration has no
    spectral gap: iterates are combined with the polynomially tilted
    weights a_j = j^(t(1+1/gamma)-1) * lambda_t^(-j), lambda_t = e^(-p(t)).

    Iterates are renormalized every step and recombined in shifted log
    scale, so nothing under- or overflows along the way."""
    intervals = _hole_intervals(hole)
    if p_t is None:
        sys = InducedSystem(params, 800, intervals)
        p_t = _pressure.closed_pressure(sys, t)
    lam = math.exp(-p_t)
    if edges is None:
        edges = interval_grid(params, intervals)
    ref = reference_masses(params, edges, t, p_t)
    mat = full_operator(params, edges, t, p_t, intervals)
    off = _off_hole_cells(edges, intervals)
    alpha = params.tail_power(t) - 1.0

    psi = np.ones(len(edges))
    log_norm = 0.0
    acc = np.zeros(len(edges))
    acc_scale = -math.inf
    norms = []
    for j in range(1, n + 1):
        psi = mat @ psi
        nj = integrate(np.abs(psi), ref, off)
        if nj <= 0.0 or not math.isfinite(nj):
            raise ConvergenceError(
                f"iterate norm degenerated at step {j}: {nj}")
        log_norm += math.log(nj)
        psi = psi / nj
        norms.append(log_norm)
        lw = alpha * math.log(j) - j * math.log(lam) + log_norm
        if lw > acc_scale:
            acc *= math.exp(acc_scale - lw) if math.isfinite(acc_scale) else 0.0
            acc_scale = lw
            acc += psi
        else:
            acc += psi * math.exp(lw - acc_scale)
    resid_raw = mat @ acc - lam * acc
    residual = (integrate(np.abs(resid_raw), ref, off)
                / (lam * integrate(np.abs(acc), ref, off)))
    avg = acc.copy()
    avg[_in_intervals(intervals, edges)] = 0.0
    avg /= integrate(np.abs(avg), ref, off)
    dens = DensityOnI(edges, avg, ref, n, 0.0)
    return AveragedResult(dens, residual, lam, n, np.array(norms))


@dataclass
class Delta0Report:
    steps: np.ndarray
    mass_wide: np.ndarray
    mass_narrow: np.ndarray
    deltas: tuple[float, float]


def delta0_diagnostic(params: MapParams, hole, n: int,
                      deltas: tuple[float, float] = (0.1, 0.01),
                      edges: np.ndarray | None = None) -> Delta0Report:
    """At t = 1 the renormalized Lebesgue pushforward drifts to the neutral
    point; this tracks the mass of the normalized iterates near 0."""
    intervals = _hole_intervals(hole)
    if edges is None:
        edges = interval_grid(params, intervals)
    ref = reference_masses(params, edges, 1.0, 0.0)
    mat = full_operator(params, edges, 1.0, 0.0, intervals)
    off = _off_hole_cells(edges, intervals)
    psi = np.ones(len(edges))
    wide = np.empty(n + 1)
    narrow = np.empty(n + 1)
    cell_mid = 0.5 * (edges[1:] + edges[:-1])

    def mass_below(v, delta):
        cv = 0.5 * (v[1:] + v[:-1]) * ref * off
        tot = cv.sum()
        return float(cv[cell_mid < delta].sum() / tot) if tot > 0 else 0.0

    wide[0] = mass_below(psi, deltas[0])
    narrow[0] = mass_below(psi, deltas[1])
    for i in range(1, n + 1):
        psi = mat @ psi
        nrm = integrate(np.abs(psi), ref, off)
        psi /= nrm
        wide[i] = mass_below(psi, deltas[0])
        narrow[i] = mass_below(psi, deltas[1])
    return Delta0Report(np.arange(n + 1), wide, narrow, deltas)


def log_holder_constant(density: DensityOnI, params: MapParams,
                        N0: int) -> float:
    """Largest log-Hölder quotient of the density over depth-N0 itinerary
    cells, with the exponent gamma/(1+gamma)."""
    from .map_core import cylinder_realize
    q = params.holder_exponent
    edges = density.edges
    vals = density.node_values
    worst = 0.0
    for idx in range(1, 2 ** N0):
        word = "".join("R" if (idx >> (N0 - 1 - j)) & 1 else "L"
                       for j in range(N0))
        cyl = cylinder_realize(params, word)
        sel = (edges >= cyl.lo + 1e-12) & (edges <= cyl.hi - 1e-12)
        xs = edges[sel]
        vs = vals[sel]
        pos = vs > 0
        xs, vs = xs[pos], vs[pos]
        if len(xs) < 2:
            continue
        lv = np.log(vs)
        dx = np.abs(xs[:, None] - xs[None, :]) ** q
        dl = np.abs(lv[:, None] - lv[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dx > 0, dl / dx, 0.0)
        worst = max(worst, float(np.max(ratio)))
    return worst
