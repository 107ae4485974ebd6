"""Core geometry of the two-branch intermittent interval family.

The map sends x to x*(1 + 2^g * x^g) on [0, 1/2) and to 2x - 1 on [1/2, 1].
The left branch has a neutral fixed point at 0, the right branch is affine
and onto.  Everything downstream is assembled from three primitives: branch
evaluation, branch inversion, and the renewal partition of [0, 1/2) into
cells that the left branch steps down toward the neutral point.

Orbit segments near 0 are never produced by forward iteration from an
arbitrary seed; they are realized by pulling points back through inverse
branches, which is contracting and therefore stable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INVERSE_TOL = 1e-14
ROUNDTRIP_TOL = 1e-12


class DomainError(ValueError):
    """An argument left the domain a routine is defined on."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class EmptyCylinderError(ValueError):
    """A requested itinerary is inadmissible (enters a removed cell)."""


@dataclass(frozen=True)
class MapParams:
    """Family parameter.  gamma in (0, 1] controls how sticky the neutral
    fixed point is.  gamma = 1 is admitted here and in the closed-form
    checks; the thermodynamic modules require gamma < 1."""

    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not math.isfinite(g) or not (0.0 < g <= 1.0):
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    @property
    def coeff(self) -> float:
        return 2.0 ** self.gamma

    @property
    def holder_exponent(self) -> float:
        """Exponent gamma/(1+gamma) governing distortion regularity."""
        return self.gamma / (1.0 + self.gamma)

    def tail_power(self, t: float = 1.0) -> float:
        """Polynomial decay power t*(1 + 1/gamma) of return-domain weights."""
        return t * (1.0 + 1.0 / self.gamma)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _branch_mask(arr, branch):
    if branch is None:
        return arr < 0.5
    if branch == "L":
        return np.ones(arr.shape, dtype=bool)
    if branch == "R":
        return np.zeros(arr.shape, dtype=bool)
    raise DomainError(f"branch must be 'L', 'R' or None, got {branch!r}")


def eval_map(params: MapParams, x, branch: str | None = None):
    """Apply the map.  `branch` pins 'L' or 'R'; without it the branch is
    chosen by position, which is ambiguous exactly on the boundary 1/2."""
    arr, scalar = _as_array(x)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("point outside [0, 1]")
    left = _branch_mask(arr, branch)
    out = np.where(left,
                   arr * (1.0 + params.coeff * np.power(arr, params.gamma)),
                   2.0 * arr - 1.0)
    return float(out) if scalar else out


def eval_deriv(params: MapParams, x, branch: str | None = None):
    """Derivative of the map; 1 at the neutral point, 2 on the right branch."""
    arr, scalar = _as_array(x)
    if np.any((arr < 0.0) | (arr > 1.0)):
        raise DomainError("point outside [0, 1]")
    left = _branch_mask(arr, branch)
    out = np.where(left,
                   1.0 + (1.0 + params.gamma) * params.coeff
                   * np.power(arr, params.gamma),
                   2.0)
    return float(out) if scalar else out


def left_inverse(params: MapParams, y, tol: float = INVERSE_TOL,
                 max_iter: int = 80):
    """Preimage under the left branch: the unique u in [0, 1/2] with
    u*(1 + 2^g u^g) = y, for y in [0, 1].

    The branch is convex with derivative >= 1, so Newton started from the
    right end of the bracket decreases monotonically onto the root; iterates
    are clipped to [0, 1/2] to absorb roundoff."""
    arr, scalar = _as_array(y)
    if np.any((arr < -1e-12) | (arr > 1.0 + 1e-12)):
        raise DomainError("left-branch image must lie in [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    c, g = params.coeff, params.gamma
    u = np.minimum(arr, 0.5)
    for _ in range(max_iter):
        pw = c * np.power(u, g)
        resid = u * (1.0 + pw) - arr
        slope = 1.0 + (1.0 + g) * pw
        u_new = np.clip(u - resid / slope, 0.0, 0.5)
        delta = np.max(np.abs(u_new - u)) if u.size else 0.0
        u = u_new
        if delta < tol:
            break
    resid = np.abs(u * (1.0 + c * np.power(u, g)) - arr)
    if np.any(resid > 1e3 * tol):
        raise ConvergenceError("left-branch inversion stalled, max residual "
                               f"{float(np.max(resid)):.3e}")
    return float(u) if scalar else u


def inverse_branch(params: MapParams, symbol: str, y):
    """Inverse of one branch; 'R' is exact, 'L' is the Newton solve."""
    if symbol == "R":
        arr, scalar = _as_array(y)
        if np.any((arr < -1e-12) | (arr > 1.0 + 1e-12)):
            raise DomainError("right-branch image must lie in [0, 1]")
        out = (arr + 1.0) / 2.0
        return float(out) if scalar else out
    if symbol == "L":
        return left_inverse(params, y)
    raise DomainError(f"unknown branch symbol {symbol!r}")


@dataclass(frozen=True)
class RenewalPartition:
    """Endpoints ell[0] = 1/2 > ell[1] > ... of the renewal cells.

    Cell n (n >= 1) is [ell[n], ell[n-1]); the left branch carries cell n
    onto cell n-1 and cell 1 onto [1/2, 1)."""

    ell: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.ell) - 1

    def cell(self, n: int) -> tuple[float, float]:
        if not 1 <= n <= self.depth:
            raise DomainError(f"cell index {n} outside 1..{self.depth}")
        return float(self.ell[n]), float(self.ell[n - 1])

    def widths(self) -> np.ndarray:
        return -np.diff(self.ell)


def renewal_endpoints(params: MapParams, depth: int) -> RenewalPartition:
    if depth < 1:
        raise DomainError("depth must be >= 1")
    ell = np.empty(depth + 1)
    ell[0] = 0.5
    for n in range(1, depth + 1):
        ell[n] = left_inverse(params, ell[n - 1])
    return RenewalPartition(ell)


def renewal_word(n: int) -> str:
    """Itinerary word of renewal cell n: n left symbols then one right."""
    if n < 1:
        raise DomainError("renewal cells are indexed from 1")
    return "L" * n + "R"


@dataclass(frozen=True)
class Cylinder:
    word: str
    lo: float
    hi: float

    @property
    def depth(self) -> int:
        return len(self.word)

    @property
    def interval(self) -> tuple[float, float]:
        return self.lo, self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def cylinder_realize(params: MapParams, word: str,
                     hole_words: tuple[str, ...] | None = None) -> Cylinder:
    """Interval of points whose branch itinerary starts with `word`,
    realized by composing inverse branches right to left.

    With `hole_words` the itinerary is rejected if any hole word occurs as a
    factor: the orbit would visit a removed cell."""
    if not word or any(sym not in "LR" for sym in word):
        raise DomainError(f"word must be a nonempty string over L/R, got {word!r}")
    if hole_words:
        for h in hole_words:
            if h and h in word:
                raise EmptyCylinderError(
                    f"itinerary {word!r} enters removed cell {h!r}")
    lo, hi = 0.0, 1.0
    for sym in reversed(word):
        lo = inverse_branch(params, sym, lo)
        hi = inverse_branch(params, sym, hi)
    return Cylinder(word, lo, hi)


def iterate_word(params: MapParams, x: float, word: str) -> np.ndarray:
    """Forward orbit of x following the branches spelled by `word`;
    returns len(word)+1 points starting at x."""
    orbit = np.empty(len(word) + 1)
    orbit[0] = x
    u = float(x)
    for k, sym in enumerate(word):
        u = eval_map(params, u, branch=sym)
        # expanding branches can push a boundary point epsilon outside
        u = min(max(u, 0.0), 1.0)
        orbit[k + 1] = u
    return orbit


def birkhoff_log_deriv(params: MapParams, x: float, n: int,
                       word: str | None = None) -> float:
    """log of the n-step derivative along the orbit of x, accumulated with
    compensated summation.  `word` pins the branch at each step; without it
    branches are chosen by position."""
    if word is not None and len(word) < n:
        raise DomainError("word shorter than requested orbit length")
    logs = []
    u = float(x)
    for k in range(n):
        sym = word[k] if word is not None else ("L" if u < 0.5 else "R")
        logs.append(math.log(eval_deriv(params, u, branch=sym)))
        u = eval_map(params, u, branch=sym)
        u = min(max(u, 0.0), 1.0)
    return math.fsum(logs)


def _orbit_word_logsum(params, x, n):
    logs = []
    syms = []
    u = float(x)
    for _ in range(n):
        sym = "L" if u < 0.5 else "R"
        syms.append(sym)
        logs.append(math.log(eval_deriv(params, u, branch=sym)))
        u = eval_map(params, u, branch=sym)
        u = min(max(u, 0.0), 1.0)
    return "".join(syms), math.fsum(logs)


def _pullback_logsum(params, target, word):
    """Pull `target` back through `word`; returns the preimage and the log
    n-step derivative accumulated at the pullback points."""
    logs = []
    u = float(target)
    for sym in reversed(word):
        u = inverse_branch(params, sym, u)
        logs.append(math.log(eval_deriv(params, u, branch=sym)))
    return u, math.fsum(logs)


def distortion_estimate(params: MapParams, n: int, samples: int = 256,
                        seed: int = 0) -> float:
    """Tempered distortion at depth n: the largest observed value of
    |log Df^n(x) - log Df^n(y)| / n over sampled pairs x, y sharing their
    first n branch symbols.  Partners are constructed by pulling a random
    target back through the sampled word, so membership in the common
    cylinder is exact."""
    if n < 1:
        raise DomainError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 1.0, samples)
    zs = rng.uniform(0.0, 1.0, samples)
    worst = 0.0
    for x, z in zip(xs, zs):
        word, s_x = _orbit_word_logsum(params, x, n)
        _, s_y = _pullback_logsum(params, z, word)
        worst = max(worst, abs(s_x - s_y) / n)
    return worst


@dataclass(frozen=True)
class DistortionFit:
    """Empirical distortion constants.

    holder_constant bounds |log DF(x) - log DF(y)| <= C |Fx - Fy|^q over
    pairs in one return branch (q the Holder exponent); the aggregate value
    inflates it by the geometric series sum(2^(-q m)) so that it also covers
    blocks spanning several returns, whose image gaps contract by at least 2
    per return.  growth_constant is the smallest C with
    Df^n >= n^(1+1/g)/C at return-time-n points."""

    holder_constant: float
    holder_constant_aggregate: float
    growth_constant: float
    holder_exponent: float
    depth: int


def fit_distortion_constant(params: MapParams, depth: int = 120,
                            grid_size: int = 33) -> DistortionFit:
    if params.gamma >= 1.0:
        raise DomainError("distortion constants are fitted for gamma < 1")
    q = params.holder_exponent
    ys = np.linspace(0.5, 1.0, grid_size)
    diff = np.abs(ys[:, None] - ys[None, :])
    np.fill_diagonal(diff, np.inf)
    denom = diff ** q

    u = ys.copy()
    logsum = np.zeros_like(ys)
    c_single = 0.0
    growth = 0.0
    for k in range(1, depth + 1):
        u = left_inverse(params, u)
        logsum = logsum + np.log(eval_deriv(params, u, branch="L"))
        log_df = math.log(2.0) + logsum          # return derivative, time k+1
        gaps = np.abs(logsum[:, None] - logsum[None, :]) / denom
        c_single = max(c_single, float(np.max(gaps)))
        min_log_df = math.log(2.0) + float(np.min(logsum))
        growth = max(growth,
                     (k + 1) ** (1.0 + 1.0 / params.gamma) / math.exp(min_log_df))
        del log_df
    aggregate = c_single / (1.0 - 2.0 ** (-q))
    return DistortionFit(holder_constant=c_single,
                         holder_constant_aggregate=aggregate,
                         growth_constant=growth,
                         holder_exponent=q,
                         depth=depth)
