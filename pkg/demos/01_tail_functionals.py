"""
Tail functionals of shifted increment laws
==========================================

Every model is xi = Y - mu with Y >= 0.  The quantities that drive the
supremum asymptotics are the tail Fbar, the integrated tail Fs and the
moments a_plus = Fs(0), a_minus = int_{-mu}^0 F, whose difference is the
drift a = -E xi.
"""

import numpy as np

from walktail import ExpShift, WeibullShift, canonical_pareto, sstar_ratio, subexp_ratio
from walktail.potential import longtail_ratio

pareto = canonical_pareto()        # alpha=3, sigma=1, mu=1.5, so a = 1
weibull = WeibullShift(beta=0.5, sigma=1.0, mu=3.0)
expo = ExpShift(rate=1.0, mu=2.0)

for m in (pareto, weibull, expo):
    mom = m.tail_moments()
    print(f"{m.family:14s} a={mom.a:.6f} a_plus={mom.a_plus:.6f} "
          f"a_minus={mom.a_minus:.6f}  check={mom.a_minus - mom.a_plus - mom.a:.1e}")

# Pareto has closed forms: Fbar(x) = (2.5+x)^-3, Fs(x) = (2.5+x)^-2 / 2
x = np.array([0.0, 2.5, 10.0, 100.0])
print("\nPareto Fs(x):", pareto.integrated_tail(x))
print("closed form: ", (2.5 + x) ** -2 / 2)

# Weibull uses the incomplete gamma function; quadrature stays as a check
print("\nWeibull Fs(5) gamma/quad:", weibull.integrated_tail(5.0),
      weibull.integrated_tail_quad(5.0))

# %%
# Class diagnostics.  For strong subexponential laws the S* ratio tends to
# 2 a_plus and the long-tail ratio to 1; the exponential law fails both.
print("\n   t   sstar(pareto)  sstar(expo)  longtail(pareto)  longtail(expo)")
for t in (5.0, 20.0, 50.0, 200.0, 500.0):
    e = sstar_ratio(t, expo) if t <= 50 else float("nan")
    lt = longtail_ratio(t, 1.0, expo) if t <= 50 else float("nan")
    print(f"{t:5.0f}   {sstar_ratio(t, pareto):12.5f} {e:12.4f}"
          f"  {longtail_ratio(t, 1.0, pareto):16.5f} {lt:14.5f}")
print("reference 2 a_plus =", 2 * pareto.tail_moments().a_plus)

# conditioned on xi >= 0, the convolution ratio tends to 1 for subexponential laws
print("\nsubexp ratio, Pareto t=500:", subexp_ratio(500.0, pareto))
print("subexp ratio, ExpShift t=50:", subexp_ratio(50.0, expo))
