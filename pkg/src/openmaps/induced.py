"""First-return structure over the right half of the interval.

The return domains to Y = [1/2, 1] accumulate at 1/2: the branch with
return time k+1 is the right-branch preimage of renewal cell k, so every
branch inverse is one affine step followed by k left-branch inversions.
All branch quantities (preimages, log return derivatives, removed
subintervals induced by a hole) are computed from pullback chains of the
image point, never by forward iteration from near the neutral point.

A hole in the base interval shows up here as a collection of "cuts" per
branch: maximal open subintervals whose return block meets the hole.  The
closed and the punctured system share one object; punctured weights consult
the cuts, closed weights ignore them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .map_core import (ConvergenceError, DomainError, MapParams, eval_deriv,
                       left_inverse, renewal_endpoints)

LOG2 = math.log(2.0)
MIN_SURVIVING_LENGTH = 1e-13


@dataclass(frozen=True)
class PotentialSpec:
    """Branch weight exp(t*Phi - s*tau + shift), where Phi is minus the log
    derivative of the return map and tau the return time.  `punctured`
    zeroes the weight on points whose return block meets the hole."""

    t: float
    s: float = 0.0
    punctured: bool = False
    shift: float = 0.0

    def __post_init__(self):
        if self.t < 0.0:
            raise DomainError("potential parameter t must be >= 0")


@dataclass(frozen=True)
class Branch:
    """One return branch: domain [lo, hi) inside Y, return time index+1."""

    index: int
    lo: float
    hi: float
    cuts: tuple[tuple[float, float], ...]

    @property
    def tau(self) -> int:
        return self.index + 1

    def surviving(self) -> list[tuple[float, float]]:
        pieces = []
        left = self.lo
        for a, b in self.cuts:
            if a > left:
                pieces.append((left, a))
            left = max(left, b)
        if self.hi > left:
            pieces.append((left, self.hi))
        return [(a, b) for a, b in pieces if b - a > MIN_SURVIVING_LENGTH]

    @property
    def survives(self) -> bool:
        return bool(self.surviving())


def _normalize_components(intervals):
    comps = []
    for a, b in intervals:
        a, b = float(a), float(b)
        if not (0.0 <= a < b <= 1.0):
            raise DomainError(f"hole component ({a}, {b}) not inside [0, 1]")
        comps.append((a, b))
    comps.sort()
    merged: list[list[float]] = []
    for a, b in comps:
        if merged and a <= merged[-1][1] + 1e-15:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    split = []
    for a, b in merged:
        if b <= 0.5 or a >= 0.5:
            split.append((a, b))
        else:
            split.append((a, 0.5))
            split.append((0.5, b))
    return tuple(split)


class InducedSystem:
    """Return branches of the first-return map to [1/2, 1], truncated at
    n_max branches, together with the hole-induced cuts."""

    def __init__(self, params: MapParams, n_max: int,
                 hole_intervals=(), warnings=()):
        if params.gamma >= 1.0:
            raise DomainError("return-time tails are summable only for gamma < 1; "
                              "gamma = 1 is supported by the closed-form checks only")
        if n_max < 8:
            raise DomainError("n_max must be at least 8")
        self.params = params
        self.n_max = int(n_max)
        self.hole_intervals = _normalize_components(hole_intervals)
        part = renewal_endpoints(params, self.n_max)
        self.ell = part.ell                      # ell[0] = 1/2, length n_max+1
        lo = np.empty(self.n_max)
        hi = np.empty(self.n_max)
        lo[0], hi[0] = 0.75, 1.0
        lo[1:] = (self.ell[1:self.n_max] + 1.0) / 2.0
        hi[1:] = (self.ell[0:self.n_max - 1] + 1.0) / 2.0
        self.branch_lo = lo
        self.branch_hi = hi
        self.warnings = list(warnings)
        self._cuts = self._compute_cuts()
        self._chain_cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
        self._tables = None
        self._pressure_cache: dict = {}

    # -- construction of hole cuts -------------------------------------

    def _compute_cuts(self) -> list[np.ndarray]:
        raw: list[list[tuple[float, float]]] = [[] for _ in range(self.n_max)]
        ell = self.ell
        for a, b in self.hole_intervals:
            if a >= 0.5:
                # the block visits Y only at time zero
                for k in range(self.n_max):
                    c = max(a, self.branch_lo[k])
                    d = min(b, self.branch_hi[k])
                    if d > c:
                        raw[k].append((c, d))
                continue
            if b <= ell[self.n_max]:
                self.warnings.append(
                    f"hole component ({a:.3e}, {b:.3e}) lies below the "
                    f"renewal resolution of n_max={self.n_max}")
                continue
            if a < ell[self.n_max]:
                self.warnings.append(
                    f"hole component ({a:.3e}, {b:.3e}) extends below the "
                    f"renewal resolution of n_max={self.n_max}")
            # renewal levels m with cell (ell[m], ell[m-1]) meeting (a, b)
            for m in range(1, self.n_max + 1):
                seg_lo = max(a, ell[m])
                seg_hi = min(b, ell[m - 1])
                if seg_hi <= seg_lo:
                    continue
                if m >= self.n_max:
                    # deepest resolved level; branches beyond truncation only
                    continue
                u = np.array([seg_lo, seg_hi])
                for k in range(m, self.n_max):
                    cut = ((u[0] + 1.0) / 2.0, (u[1] + 1.0) / 2.0)
                    raw[k].append(cut)
                    if k + 1 < self.n_max:
                        u = left_inverse(self.params, u)
        cuts = []
        for k, pieces in enumerate(raw):
            if not pieces:
                cuts.append(np.empty(0))
                continue
            pieces.sort()
            merged = [list(pieces[0])]
            for c, d in pieces[1:]:
                if c <= merged[-1][1] + 1e-15:
                    merged[-1][1] = max(merged[-1][1], d)
                else:
                    merged.append([c, d])
            clipped = []
            for c, d in merged:
                c = max(c, self.branch_lo[k])
                d = min(d, self.branch_hi[k])
                if d > c:
                    clipped.extend((c, d))
            cuts.append(np.asarray(clipped))
        return cuts

    # -- branch access ---------------------------------------------------

    def branch(self, k: int) -> Branch:
        if not 0 <= k < self.n_max:
            raise DomainError(f"branch index {k} outside 0..{self.n_max - 1}")
        flat = self._cuts[k]
        cuts = tuple((float(flat[i]), float(flat[i + 1]))
                     for i in range(0, len(flat), 2))
        return Branch(k, float(self.branch_lo[k]), float(self.branch_hi[k]), cuts)

    @property
    def branches(self) -> list[Branch]:
        return [self.branch(k) for k in range(self.n_max)]

    @property
    def has_hole(self) -> bool:
        return bool(self.hole_intervals)

    def surviving_lengths(self) -> np.ndarray:
        out = np.empty(self.n_max)
        for k in range(self.n_max):
            flat = self._cuts[k]
            removed = float(np.sum(flat[1::2] - flat[0::2])) if len(flat) else 0.0
            out[k] = max(self.branch_hi[k] - self.branch_lo[k] - removed, 0.0)
        return out

    def branch_for(self, x) -> np.ndarray:
        """Branch index of each point of Y; errors below the resolved floor."""
        pts = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any((pts < self.branch_lo[-1]) | (pts > 1.0)):
            raise DomainError("point outside the resolved part of [1/2, 1]")
        asc = self.branch_lo[::-1]
        idx = np.searchsorted(asc, pts, side="right") - 1
        return (self.n_max - 1) - idx

    def in_cut(self, k: int, pts: np.ndarray) -> np.ndarray:
        flat = self._cuts[k]
        if len(flat) == 0:
            return np.zeros(np.shape(pts), dtype=bool)
        idx = np.searchsorted(flat, pts, side="left")
        return (idx % 2) == 1

    def in_cut_mixed(self, ks: np.ndarray, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape, dtype=bool)
        for k in np.unique(ks):
            sel = ks == k
            out[sel] = self.in_cut(int(k), pts[sel])
        return out

    # -- pullback chains ---------------------------------------------------

    def chains(self, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Exact branch data at image points: XI[k] is the branch-k preimage
        of each node, LOGDF[k] the log return derivative there (as a function
        of the node).  Built incrementally, one left inversion per level."""
        nodes = np.ascontiguousarray(np.asarray(nodes, dtype=float))
        if np.any((nodes < 0.5) | (nodes > 1.0)):
            raise DomainError("chain nodes must lie in [1/2, 1]")
        key = nodes.tobytes()
        hit = self._chain_cache.get(key)
        if hit is not None:
            return hit
        m = len(nodes)
        xi = np.empty((self.n_max, m))
        logdf = np.empty((self.n_max, m))
        xi[0] = (nodes + 1.0) / 2.0
        logdf[0] = LOG2
        u = nodes.copy()
        s = np.zeros(m)
        for k in range(1, self.n_max):
            u = left_inverse(self.params, u)
            s = s + np.log(eval_deriv(self.params, u, branch="L"))
            xi[k] = (u + 1.0) / 2.0
            logdf[k] = LOG2 + s
        if len(self._chain_cache) >= 4:
            self._chain_cache.pop(next(iter(self._chain_cache)))
        self._chain_cache[key] = (xi, logdf)
        return xi, logdf

    def pressure_tables(self, grid_size: int = 1025):
        """Uniform-grid Hermite tables of the branch inverses, used by the
        periodic-point machinery: values XI, slopes exp(-LOGDF), plus the
        log return derivative at the left image endpoint (the branch sup of
        the weight, since exp(t*Phi) decreases across each branch)."""
        if self._tables is None:
            grid = np.linspace(0.5, 1.0, grid_size)
            xi, logdf = self.chains(grid)
            self._tables = {
                "grid_size": grid_size,
                "h": 0.5 / (grid_size - 1),
                "xi": xi,
                "dxi": np.exp(-logdf),
                "logdf_left": logdf[:, 0].copy(),
                "logdf": logdf,
            }
        return self._tables

    def sup_log_weights(self, spec: PotentialSpec) -> np.ndarray:
        """log sup of the branch weight, one entry per branch; -inf for
        punctured branches with no surviving piece."""
        tables = self.pressure_tables()
        tau = np.arange(1, self.n_max + 1, dtype=float)
        w = -spec.t * tables["logdf_left"] - spec.s * tau + spec.shift
        if spec.punctured:
            dead = self.surviving_lengths() <= MIN_SURVIVING_LENGTH
            w = np.where(dead, -np.inf, w)
        return w

    def tail_weight_bound(self, spec: PotentialSpec) -> float:
        """Upper estimate of the branch-weight mass lost to truncation,
        extrapolating the polynomial branch decay beyond n_max."""
        tables = self.pressure_tables()
        k_last = self.n_max - 1
        w_last = math.exp(-spec.t * tables["logdf_left"][k_last]
                          - spec.s * (k_last + 1) + spec.shift)
        alpha = self.params.tail_power(spec.t)
        if spec.s > 1e-12:
            return w_last * math.exp(-spec.s) / (1.0 - math.exp(-spec.s))
        if alpha <= 1.0 + 1e-9:
            return math.inf
        return w_last * k_last / (alpha - 1.0)


def build_induced(params: MapParams, hole=None, n_max: int = 2000) -> InducedSystem:
    """Assemble the truncated return system; `hole` is None, a sequence of
    (lo, hi) components, or any object exposing `.intervals`."""
    if hole is None:
        intervals = ()
    elif hasattr(hole, "intervals"):
        intervals = tuple(hole.intervals)
    else:
        intervals = tuple(hole)
    return InducedSystem(params, n_max, intervals)


def return_time(sys: InducedSystem, x) -> np.ndarray:
    return sys.branch_for(x) + 1


def induced_potential(sys: InducedSystem, spec: PotentialSpec, x):
    """Weight exponent t*Phi - s*tau + shift at points of Y, computed from
    the forward return block (one affine step, then left-branch steps).
    Punctured evaluation returns -inf on blocks that meet the hole."""
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    scalar = np.ndim(x) == 0
    ks = sys.branch_for(pts)
    u = 2.0 * pts - 1.0
    log_df = np.full(pts.shape, LOG2)
    kmax = int(ks.max()) if len(ks) else 0
    for step in range(1, kmax + 1):
        active = ks >= step
        if not np.any(active):
            break
        ua = u[active]
        log_df[active] += np.log(eval_deriv(sys.params, ua, branch="L"))
        u[active] = eval_map_left(sys.params, ua)
    val = -spec.t * log_df - spec.s * (ks + 1.0) + spec.shift
    if spec.punctured:
        dead = sys.in_cut_mixed(ks, pts)
        val = np.where(dead, -np.inf, val)
    return float(val[0]) if scalar else val


def eval_map_left(params: MapParams, x):
    # left branch without the domain fuss; callers guarantee x in [0, 1/2)
    return x * (1.0 + params.coeff * np.power(x, params.gamma))


@dataclass(frozen=True)
class TailFit:
    slope: float
    expected: float
    intercept: float
    n_window: tuple[int, int]


def tail_exponent_fit(sys: InducedSystem, t: float | None = None,
                      n_lo: int | None = None,
                      n_hi: int | None = None) -> TailFit:
    """Least-squares slope of the branch tail.

    With t None: log surviving length of the return-time-n set against
    log n, expected slope -(1 + 1/gamma).  With t given: log of the branch
    sup weight exp(t*Phi), expected slope -t*(1 + 1/gamma)."""
    n_hi = n_hi or sys.n_max
    n_lo = n_lo or max(2, n_hi // 4)
    if not 2 <= n_lo < n_hi <= sys.n_max:
        raise DomainError("bad fit window")
    taus = np.arange(n_lo, n_hi + 1, dtype=float)
    ks = np.arange(n_lo - 1, n_hi)
    if t is None:
        sizes = sys.surviving_lengths()[ks]
        expected = -sys.params.tail_power(1.0)
        good = sizes > 0
        taus, sizes = taus[good], sizes[good]
        logy = np.log(sizes)
    else:
        tables = sys.pressure_tables()
        logy = -t * tables["logdf_left"][ks]
        expected = -sys.params.tail_power(t)
    slope, intercept = np.polyfit(np.log(taus), logy, 1)
    return TailFit(float(slope), float(expected), float(intercept),
                   (int(n_lo), int(n_hi)))
