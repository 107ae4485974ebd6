"""Pinned reference numbers for the gamma = 0.5 family.

Every value was produced once by an independent route and frozen: closed
forms where they exist, otherwise the cycle-sum ladder at full budget
(6 doubling levels, 2e6 words, n_max >= 400).  Tests recomputing them must
land inside the stated windows; see the per-test tolerances.
"""
import math

# closed pressures p(t); p(0) = log 2 and p(1) = 0 are exact
P_CLOSED = {
    0.0: math.log(2.0),
    0.2: 0.550722957,
    0.4: 0.409335494,
    0.5: 0.339136004,
    0.6: 0.269345641,
    0.95: 0.030117631,
    1.0: 0.0,
}

# punctured pressures p^H(t) for the N0 = 3 word-RLR hole
P_RLR = {
    0.2: 0.427167535,
    0.4: 0.293890285,
    0.6: 0.163529491,
}

# escape-rate targets p(t) - p^H(t) for the same hole
GAP_RLR = {t: P_CLOSED[t] - P_RLR[t] for t in (0.2, 0.4, 0.6)}

# root of p^H(t) = 0 for the RLR hole (full-budget bisection)
THR_RLR = 0.868645

# aggregate empirical distortion constant of the gamma = 0.5 return map
# (depth-120 fit); bounds the log-Holder constant checks
C_D_AGGREGATE = 5.4404

# stability family for the survivor battery: nested pure-R Markov cells,
# N0 = 3..6, at t = 0.5 (knobs M=256, n_max=400, levels=5, budget=3e5)
SWEEP_KNOBS = dict(M=256, n_max=400, n_levels=5, budget=300_000)
SWEEP_ERR_X = (0.1161, 0.0647, 0.0381, 0.0222)
