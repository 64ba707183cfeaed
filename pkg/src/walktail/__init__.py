"""Martingale tail bounds and Monte Carlo checks for heavy-tailed random walks.

A random walk ``S_n`` with i.i.d. increments of negative mean ``-a`` has an
a.s. finite supremum ``M``.  For long-tailed and strong subexponential
increments this package certifies the tail-potential sub/supermartingales
that drive the asymptotics ``P(M > x) ~ Fs(x)/a`` and
``P(M_tau > x) ~ E[tau] Fbar(x)``, turns the certificates into explicit
bounds, and checks everything against simulation.
"""

from .bounds import (BoundTable, LundbergBaseline, asymp_Mtau, build_bound_table,
                     choose_r, eq0_ratio, fkz_lower_bound, lower_bound_M,
                     lower_bound_Mtau, lundberg, upper_bound_M, upper_bound_Mtau,
                     veraverbecke)
from .models import (ExpShift, IncrementModel, ParetoShift, TailMoments, WeibullShift,
                     canonical_pareto, model_from_dict)
from .potential import (DriftReport, MartingaleCertificate, TailPotential,
                        VerificationGrid, certify_sub, certify_super, drift_hat,
                        drift_plain, longtail_ratio, potential_G, potential_G_hat,
                        sstar_ratio, subexp_ratio, threshold_r)
from .sim import (CycleBatch, CycleSample, LindleyEstimate, SupremumEstimate, TauStats,
                  direct_sup_tail, empirical_drift_check, exp_moment_stau,
                  lindley_tail, mtau_tail, run_cycle, simulate_cycles, tau_stats)
from .streams import RngStream

__version__ = "0.1.0"
