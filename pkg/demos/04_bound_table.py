"""
Non-asymptotic bounds
=====================

Certificates turn into explicit inequalities.  The upper bound needs one more
ingredient, a level r with P(M > r) <= Fs(R)/(a - eps); here it comes from a
one-sided Monte Carlo bound, so the upper columns hold at that confidence.
"""

import numpy as np

from walktail import (ExpShift, build_bound_table, canonical_pareto, certify_sub,
                      certify_super, choose_r, lindley_tail, lundberg, simulate_cycles,
                      tau_stats)

model = canonical_pareto()
sub, sup = certify_sub(0.5, model), certify_super(0.5, model)

grid = np.concatenate([np.round(np.arange(0, 8.05, 0.1), 10), [10, 15, 20, 30, 50]])
est = lindley_tail(model, grid, steps=10**6, burn_in=10**4, replicas=32, rng=1)
r = choose_r(sup, est.upper_envelope(0.999), model, r_grid=grid)
print(f"R_sub={sub.R:g}  R_super={sup.R:.4f}  r={r:g}")

cycles = simulate_cycles(model, 10**6, seed=3).complete()
ts = tau_stats(cycles, model, level=0.999)
table = build_bound_table(model, [5, 10, 20, 50, 100], sub, sup, r, ts.tau_interval,
                          ts.tau_mean, cycles.s_tau)

cols = ("x", "lower_M", "fkz_lower", "asymp_M", "upper_M", "lower_Mtau", "upper_Mtau")
print("".join(f"{c:>12s}" for c in cols))
for row in table.rows:
    print("".join(f"{'':>12s}" if row[c] is None else f"{row[c]:12.4g}" for c in cols),
          row["notes"])
print("violations:", table.violations())

# %%
# The light-tailed baseline: E exp(h0 xi) = 1 gives P(M > x) <= exp(-h0 x).
expo = ExpShift(1.0, 2.0)
base = lundberg(expo, simulate_cycles(expo, 10**6, seed=4))
print(f"\nh0 = {base.h0:.12f} (residual {base.residual:.1e}), "
      f"1 - E exp(h0 S_tau) = {base.local_prefactor:.4f}")
lt = lindley_tail(expo, [1.0, 3.0, 5.0], steps=10**6, burn_in=10**4, replicas=16, rng=5)
for x, p in zip(lt.x_grid, lt.p_hat):
    print(f"x={x:g}: P(M>x) = {p:.4e} <= doob {base.doob(x):.4e}; "
          f"ratio {p / base.doob(x):.3f}")
