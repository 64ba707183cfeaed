"""Thin wrapper over QUADPACK with tolerance checking."""

from __future__ import annotations

import math
import warnings

from scipy import integrate

from .errors import QuadratureError

# QUADPACK's error estimate is pessimistic at tight tolerances and it flags
# "roundoff detected" well before the result is actually degraded; only
# treat a flagged run as failed when the estimate is this far off target.
_SLACK = 1e3


def quad(f, a, b, rtol=1e-12, points=None, limit=500):
    """Integrate ``f`` over ``[a, b]`` (either end may be infinite).

    Raises :class:`QuadratureError` carrying the achieved error estimate when
    QUADPACK reports trouble and the estimate exceeds ``rtol`` by more than
    a fixed slack factor.
    """
    if a == b:
        return 0.0
    if points is not None:
        points = sorted(p for p in points if a < p < b)
        if not points or math.isinf(a) or math.isinf(b):
            points = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *msg = integrate.quad(
            f, a, b, epsabs=0.0, epsrel=rtol, limit=limit, points=points,
            full_output=1,
        )
    # a trailing message is only returned when QUADPACK sets ier > 0
    if msg and err > _SLACK * rtol * abs(val) and err > 1e-300:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] reached {err:.3e} (requested rel {rtol:.1e})",
            achieved=err, requested=rtol,
        )
    return val
