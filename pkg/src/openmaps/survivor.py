"""Equilibrium measures on survivor sets, built spectrally.

The pipeline: find the punctured pressure p^H(t) (cycle sums, then a
secant polish against the collocation operator so its eigenvalue sits on
1 to rounding), normalize the induced potential to
Psi = t*Phi - tau*p^H(t) - P_te with P_te the closed induced pressure at
that tilt, and take eigendata of the punctured operator for Psi.  The
leading eigenvalue Lambda is the survival factor per return; the right
vector g and left functional e combine into the survivor measure on Y,
nu(psi) = e(psi * g), realized on the collocation nodes as the entrywise
product of the two eigenvectors.  Spreading each return branch's mass
along its forward orbit and dividing by the mean return time projects nu
to the whole interval.

The same construction with no hole gives the closed equilibrium state,
so stability sweeps compare the two through one code path and the
discretization bias largely cancels in the differences.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .map_core import DomainError, MapParams
from .induced import InducedSystem, PotentialSpec, build_induced, eval_map_left
from . import pressure as _pressure
from .pressure import DEFAULT_BUDGET, DEFAULT_LEVELS
from .spectra import (GAP_GATE, M_DEFAULT, assemble, collocation_grid,
                      leading_eigen, operator_root)

SURVIVOR_N_MAX = 800

# fixed battery for weak-convergence sweeps: two polynomials and the
# indicators of three dyadic intervals
PSI_BATTERY = (
    ("x", lambda x: x),
    ("x_sq", lambda x: x * x),
    ("left_half", lambda x: (x < 0.5).astype(float)),
    ("third_quarter", lambda x: ((x >= 0.5) & (x < 0.75)).astype(float)),
    ("top_quarter", lambda x: (x >= 0.75).astype(float)),
)


def _hole_intervals(hole):
    if hole is None:
        return ()
    if hasattr(hole, "intervals"):
        return tuple(hole.intervals)
    hole = tuple(hole)
    if len(hole) == 2 and all(np.isscalar(c) for c in hole):
        return ((float(hole[0]), float(hole[1])),)
    return tuple((float(a), float(b)) for a, b in hole)


@dataclass
class SurvivorMeasure:
    """Spectral data of the normalized punctured return operator and the
    survivor measure it defines.

    `node_mass` holds the nu-weights at the collocation nodes (entrywise
    left*right eigenvector product, renormalized over the resolved
    branches); `node_tau` the return time at each node.  The measure of
    any induced observable is a weighted node sum, and the projection to
    the interval walks each node's forward orbit."""

    params: MapParams
    hole_intervals: tuple
    t: float
    p_hole: float
    boundary: bool                 # p^H pinned at 0 (at or past the threshold)
    P_te: float                    # closed pressure of t*Phi - tau*p^H
    P_te_cycles: float             # same, from the cycle-sum estimator
    P_open_cycles: float           # punctured value at the same tilt
    log_Lambda: float
    identity_gap: float            # |log Lambda - cycle-sum pressure gap|
    kac: float                     # mean return time under nu
    tail_mass: float               # raw eigen-mass below the resolved branches
    kac_tail_bound: float          # extrapolated tau-mass past the truncation
    perturbation_size: float       # m-tilde of (hole-lift union its preimage)
    gap_estimate: float
    eigen_residual: float
    nodes: np.ndarray = field(repr=False)
    node_mass: np.ndarray = field(repr=False)
    node_tau: np.ndarray = field(repr=False)
    node_branch: np.ndarray = field(repr=False)
    right_vec: np.ndarray = field(repr=False)
    left_vec: np.ndarray = field(repr=False)
    left_closed: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    sys: InducedSystem = field(repr=False)
    warnings: tuple = ()

    @property
    def epsilon(self) -> float:
        return float(sum(b - a for a, b in self.hole_intervals))

    def nu_Y(self, psi) -> float:
        """Integral of psi (a function on Y) against the survivor measure
        of the return map."""
        x = self.nodes[self.node_branch >= 0]
        return float(self.node_mass @ psi(x))

    def branch_masses(self) -> np.ndarray:
        """nu-mass of each return branch domain."""
        out = np.zeros(self.sys.n_max)
        np.add.at(out, self.node_branch[self.node_branch >= 0],
                  self.node_mass)
        return out

    def nu_I(self, psi) -> float:
        """Integral of psi (a function on [0,1]) against the projected
        survivor measure: each node's mass visits its full forward orbit
        block, and the total is divided by the mean return time."""
        keep = self.node_branch >= 0
        x = self.nodes[keep]
        w = self.node_mass
        k = self.node_branch[keep]
        acc = float(w @ psi(x))
        z = 2.0 * x - 1.0
        j = 1
        alive = k >= j
        while np.any(alive):
            acc += float(w[alive] @ psi(z[alive]))
            j += 1
            nxt = k >= j
            if np.any(nxt):
                z[nxt] = eval_map_left(self.params, z[nxt])
            alive = nxt
        return acc / self.kac

    def limit_form(self, psi, n: int = 40) -> float:
        """The defining limit of nu, evaluated at finite n: push psi times
        the eigendensity through n punctured steps, rescale by Lambda each
        step, and integrate against the closed conformal measure.  Kept as
        a validation path for the spectral-projector values."""
        lam = math.exp(self.log_Lambda)
        w = psi(self.nodes) * self.right_vec
        for _ in range(n):
            w = self.matrix @ w / lam
        return float(self.left_closed @ w) / float(
            self.left_closed @ self.right_vec)


def build_survivor(params: MapParams, hole, t: float, M: int = M_DEFAULT,
                   n_max: int = SURVIVOR_N_MAX,
                   n_levels: int = DEFAULT_LEVELS,
                   budget: int = DEFAULT_BUDGET) -> SurvivorMeasure:
    """Survivor-set equilibrium data for the given hole at parameter t.

    With no hole this degenerates to the closed equilibrium state
    (Lambda = 1 exactly).  Raises when the punctured operator shows no
    usable spectral gap; the construction needs one."""
    if not 0.0 <= t <= 1.0:
        raise DomainError("t must lie in [0, 1]")
    intervals = _hole_intervals(hole)
    sys = build_induced(params, hole=intervals if intervals else None,
                        n_max=n_max)
    warnings = list(sys.warnings)
    # every branch endpoint joins the grid so the branch-mass ladder stays
    # resolved to the truncation depth
    grid = collocation_grid(sys, M, include=sys.branch_lo)

    if not sys.has_hole:
        p_h = _pressure.closed_pressure(sys, t, n_levels=n_levels,
                                        budget=budget)
        boundary = False
    else:
        pp = _pressure.punctured_pressure(sys, t, n_levels=n_levels,
                                          budget=budget)
        p_h = pp.value
        boundary = pp.transient or pp.boundary
    if p_h > 0.0:
        p_h = operator_root(sys, t, p_h, punctured=sys.has_hole, M=M,
                            grid=grid)
        if p_h < 0.0:
            p_h, boundary = 0.0, True

    # closed reference operator at the same tilt; its eigenvalue is the
    # normalizing pressure and its left vector the conformal measure
    spec_c = PotentialSpec(t, p_h, punctured=False)
    op_c = assemble(sys, spec_c, M, grid=grid, strict_tail=False)
    warnings.extend(op_c.warnings)
    eig_c = leading_eigen(op_c)
    P_te = math.log(eig_c.lambda_)
    P_te_cyc = _pressure.pressure(sys, spec_c, n_levels=n_levels,
                                  budget=budget).value
    if sys.has_hole:
        P_open_cyc = _pressure.pressure(
            sys, PotentialSpec(t, p_h, punctured=True),
            n_levels=n_levels, budget=budget).value
    else:
        P_open_cyc = P_te_cyc

    spec_o = PotentialSpec(t, p_h, punctured=True, shift=-P_te)
    op_o = assemble(sys, spec_o, M, grid=grid, strict_tail=False)
    eig = leading_eigen(op_o)
    if eig.gap_estimate >= GAP_GATE:
        raise DomainError(
            f"hole too large: second/first eigenvalue ratio "
            f"{eig.gap_estimate:.3f} leaves no usable spectral gap "
            f"(gate {GAP_GATE})")
    log_Lambda = math.log(eig.lambda_)
    identity_gap = abs(log_Lambda - (P_open_cyc - P_te_cyc))

    nodes = op_o.nodes
    uv = eig.left_vec * eig.right_vec
    floor = sys.branch_lo[-1]
    resolved = nodes >= floor
    tail_mass = float(uv[~resolved].sum())
    branch = np.full(len(nodes), -1, dtype=int)
    branch[resolved] = sys.branch_for(nodes[resolved])
    mass = uv[resolved]
    total = float(mass.sum())
    if total <= 0.0:
        raise DomainError("survivor measure has no mass on resolved branches")
    mass = mass / total
    tau = branch[resolved].astype(float) + 1.0
    kac = float(mass @ tau)
    kac_tail = _kac_tail_bound(sys, t, p_h, mass, branch[resolved])

    pert = _perturbation_size(sys, eig_c.left_vec, nodes, branch, resolved)

    return SurvivorMeasure(
        params=params, hole_intervals=intervals, t=t, p_hole=p_h,
        boundary=boundary, P_te=P_te, P_te_cycles=P_te_cyc,
        P_open_cycles=P_open_cyc, log_Lambda=log_Lambda,
        identity_gap=identity_gap, kac=kac, tail_mass=tail_mass,
        kac_tail_bound=kac_tail, perturbation_size=pert,
        gap_estimate=eig.gap_estimate, eigen_residual=eig.residual,
        nodes=nodes, node_mass=mass, node_tau=tau,
        node_branch=branch, right_vec=eig.right_vec, left_vec=eig.left_vec,
        left_closed=eig_c.left_vec, matrix=op_o.matrix, sys=sys,
        warnings=tuple(warnings))


def _kac_tail_bound(sys, t, p_h, mass, branch):
    """tau-weighted nu-mass beyond the branch truncation, extrapolated
    from the decay of the last resolved branches."""
    K = sys.n_max
    ref = np.zeros(K)
    np.add.at(ref, branch, mass)
    live = np.nonzero(ref > 0.0)[0]
    if len(live) == 0:
        return 0.0
    k_hi = live[-1]
    k_fit = live[live >= max(k_hi // 2, k_hi - 40)]
    vals = ref[k_fit]
    alpha = sys.params.tail_power(t)
    # nu(Y_k) ~ C k^-alpha e^-(k+1) p: fit C at the deepest live branches
    log_c = float(np.max(np.log(vals) + alpha * np.log(k_fit + 1.0)
                         + (k_fit + 1) * p_h))
    c_fit = math.exp(min(log_c, 700.0))
    if p_h <= 1e-12 and alpha <= 2.0 + 1e-9:
        return math.inf
    ks = np.arange(K, K + 200000, dtype=float)
    terms = c_fit * (ks + 1.0) * np.exp(-alpha * np.log(ks + 1.0)
                                        - (ks + 1.0) * p_h)
    partial = float(terms.sum())
    if p_h > 1e-12:
        partial += float(terms[-1]) / p_h
    else:
        partial += c_fit * float(ks[-1]) ** (2.0 - alpha) / (alpha - 2.0)
    return partial


def _perturbation_size(sys, m_closed, nodes, branch, resolved):
    """Closed conformal mass of the lifted hole union its one-step
    preimage under the return map; the operator-difference norm of the
    puncturing is bounded by this quantity."""
    if not sys.has_hole:
        return 0.0
    x = nodes[resolved]
    ks = branch[resolved]
    in_h = sys.in_cut_mixed(ks, x)
    # forward images, walked level by level: branch k applies the right
    # leg once and then k left legs
    fx = 2.0 * x - 1.0
    out = np.where(ks == 0, fx, np.nan)
    z = fx.copy()
    for j in range(1, int(ks.max()) + 1):
        sel = ks >= j
        z[sel] = eval_map_left(sys.params, z[sel])
        hit = ks == j
        out[hit] = z[hit]
    out = np.clip(out, 0.5, 1.0)
    ok = out >= sys.branch_lo[-1]
    in_fh = np.zeros(len(x), dtype=bool)
    if np.any(ok):
        ks2 = sys.branch_for(out[ok])
        in_fh[ok] = sys.in_cut_mixed(ks2, out[ok])
    weights = m_closed[resolved]
    return float(weights[in_h | in_fh].sum())


@dataclass
class ProjectedWeights:
    """Cell decomposition of the projected survivor measure: branch k
    spreads its nu-mass over the tau_k cells of its orbit block (the
    branch domain in Y, then the renewal cells J_k down to J_1), each
    cell carrying the full branch mass divided by the mean return time."""

    kac: float
    branch: np.ndarray
    step: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    weight: np.ndarray
    tail_bound: float

    def total(self) -> float:
        return float(self.weight.sum())

    def y_mass(self) -> float:
        return float(self.weight[self.step == 0].sum())


def project_to_I(sm: SurvivorMeasure) -> ProjectedWeights:
    """Cylinder weights of the projected measure on the interval."""
    if not math.isfinite(sm.kac_tail_bound):
        raise DomainError(
            "return time is not integrable at this truncation: deepen "
            "n_max or move t below the dimension threshold")
    sys = sm.sys
    nu_k = sm.branch_masses()
    ell = sys.ell
    ks, steps, los, his, ws = [], [], [], [], []
    for k in range(sys.n_max):
        if nu_k[k] <= 0.0:
            continue
        w = nu_k[k] / sm.kac
        ks.append(k)
        steps.append(0)
        los.append(sys.branch_lo[k])
        his.append(sys.branch_hi[k])
        ws.append(w)
        for i in range(1, k + 1):
            # step i of branch k sits in the renewal cell J_{k-i+1}
            m = k - i + 1
            ks.append(k)
            steps.append(i)
            los.append(ell[m])
            his.append(ell[m - 1])
            ws.append(w)
    return ProjectedWeights(sm.kac, np.array(ks), np.array(steps),
                            np.array(los), np.array(his), np.array(ws),
                            sm.kac_tail_bound)


def free_energy(sm: SurvivorMeasure) -> float:
    """Entropy plus t times the punctured-potential integral of the
    projected measure: the punctured pressure at the survivor tilt scaled
    by the measure of Y, shifted by p^H(t).  Positive below the dimension
    threshold (where it equals p^H), zero at it, negative above."""
    open_at_tilt = sm.log_Lambda + sm.P_te
    return open_at_tilt / sm.kac + sm.p_hole


def stability_sweep(params: MapParams, family, t: float, psis=PSI_BATTERY,
                    M: int = M_DEFAULT, n_max: int = SURVIVOR_N_MAX,
                    n_levels: int = DEFAULT_LEVELS,
                    budget: int = DEFAULT_BUDGET, jobs: int = 1):
    """Survivor data along a family of holes at fixed t, with weak-
    convergence errors against the closed equilibrium.

    Returns rows (dicts, columns in a fixed order) sorted by decreasing
    hole size, ending with the closed reference row."""
    holes = list(family.intervals) if hasattr(family, "intervals") and \
        hasattr(family, "widths") else list(family)

    def build(h):
        return build_survivor(params, h, t, M=M, n_max=n_max,
                              n_levels=n_levels, budget=budget)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            built = list(pool.map(build, holes))
    else:
        built = [build(h) for h in holes]
    reference = build(None)
    ref_vals = [reference.nu_I(fn) for _, fn in psis]

    rows = []
    for sm in sorted(built, key=lambda s: -s.epsilon) + [reference]:
        row = {
            "gamma": params.gamma,
            "t": t,
            "epsilon": sm.epsilon,
            "pH": sm.p_hole,
            "P_te": sm.P_te,
            "log_Lambda": sm.log_Lambda,
            "free_energy": free_energy(sm),
            "kac": sm.kac,
        }
        for j, ((_, fn), ref) in enumerate(zip(psis, ref_vals), start=1):
            row[f"err_psi_{j}"] = abs(sm.nu_I(fn) - ref)
        rows.append(row)
    return rows
