"""
Simulation against the asymptotics
==================================

P(M > x) is the stationary tail of the Lindley recursion W <- max(W + xi, 0),
and cycles up to the first return below zero give (tau, S_tau, M_tau).  The
asymptotics to compare against are P(M > x) ~ Fs(x)/a and
P(M_tau > x) ~ E[tau] Fbar(x).
"""

import numpy as np

from walktail import (canonical_pareto, direct_sup_tail, lindley_tail, mtau_tail,
                      simulate_cycles, tau_stats)
from walktail.sim import iglehart_residual

model = canonical_pareto()
a = model.tail_moments().a

grid = np.concatenate([np.round(np.arange(0, 8.05, 0.1), 10), [10, 15, 20, 30, 50]])
est = lindley_tail(model, grid, steps=10**6, burn_in=10**4, replicas=32, rng=1)

print("   x      P(M>x)     +-99%     ratio to Fs(x)/a")
for x in (1.0, 2.0, 5.0, 10.0, 20.0, 50.0):
    k = int(np.flatnonzero(grid == x)[0])
    ratio = est.p_hat[k] * a / model.integrated_tail(x)
    print(f"{x:5.0f}  {est.p_hat[k]:.4e}  {est.ci_halfwidth[k]:.1e}   {ratio:.3f}")

# The ratio creeps down toward 1; second-order terms are large at these x.

# %%
# First-passage estimate at x = 5.  Paths are abandoned below -K, which can
# only bias the estimate down, by at most an upper bound on P(M > x + K).
bias_fn = lambda y: model.integrated_tail(max(y - 4.0, 0.0)) / 0.5
sup = direct_sup_tail(model, 5.0, 50.0, 10**6, rng=2, bias_fn=bias_fn)
print(f"\nfirst passage P(M>5) = {sup.p_hat:.4e} +- {sup.ci_halfwidth:.1e} "
      f"(bias <= {sup.bias_upper:.1e}); Lindley {est.p_hat[grid == 5.0][0]:.4e}")

# %%
cycles = simulate_cycles(model, 10**7, seed=3)
ts = tau_stats(cycles, model)
print(f"\nE tau = {ts.tau_mean:.5f} +- {ts.tau_ci:.1e}, E S_tau = {ts.stau_mean:.5f}")
print(f"Wald residual |E S_tau + a E tau| = {ts.wald_residual:.2e} (99% CI {ts.wald_ci:.1e})")
for x in (5.0, 10.0, 15.0, 30.0):
    p, ci = mtau_tail(cycles, x)
    print(f"P(M_tau>{x:g}) = {p:.3e} +- {ci:.1e};  ratio to E tau Fbar = "
          f"{p / (ts.tau_mean * model.tail(x)):.3f}")

# %%
# Iglehart decomposition: P(M>x) = P(M_tau>x) + E[P(M > x - S_tau); M_tau <= x].
res = iglehart_residual(est, cycles, 5.0)
print(f"\nIglehart residual at x=5: {res['residual']:.2e} (CI {res['ci']:.1e})")
