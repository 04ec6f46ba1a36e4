"""Complete elliptic integral of the second kind.

E enters the axisymmetric dispersion kernel through the modulus
gamma = 2*sqrt(r*r') / (r + r'), which lies in [0, 1] for r, r' >= 0
and reaches 1 exactly on the kernel diagonal r = r'.

Convention: the argument is the modulus gamma, not the parameter
m = gamma**2.  The two endpoint values pin the convention down:
E(0) = pi/2 and E(1) = 1.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ellip_e", "kernel_modulus"]

_MAX_AGM_ITER = 40


def ellip_e(modulus):
    """Complete elliptic integral of the second kind, E(modulus).

    E(m) = integral_0^{pi/2} sqrt(1 - m^2 sin^2 t) dt, evaluated by the
    arithmetic-geometric-mean iteration.  Accepts a scalar or an array;
    the result has the input's shape.

    The AGM recursion converges quadratically, so full double precision
    is reached in at most ~10 sweeps for any modulus in [0, 1].  E is
    finite at modulus 1 (only its derivative is singular), and the
    endpoints are returned exactly: E(0) = pi/2, E(1) = 1.

    Raises
    ------
    ValueError
        If any modulus lies outside [0, 1] or is not finite.
    """
    m = np.asarray(modulus, dtype=float)
    scalar = m.ndim == 0
    m = np.atleast_1d(m)
    if not np.all(np.isfinite(m)):
        raise ValueError("elliptic modulus must be finite")
    if np.any(m < 0.0) or np.any(m > 1.0):
        raise ValueError("elliptic modulus must lie in [0, 1]")

    out = np.empty_like(m)
    at_one = m == 1.0
    out[at_one] = 1.0

    interior = ~at_one
    if np.any(interior):
        k = m[interior]
        a = np.ones_like(k)
        b = np.sqrt((1.0 - k) * (1.0 + k))  # complementary modulus, no cancellation
        c2_sum = 0.5 * k * k                # 2^{n-1} c_n^2 accumulated, n = 0 term
        pow2 = 1.0
        for _ in range(_MAX_AGM_ITER):
            c = 0.5 * (a - b)
            if np.all(c <= 0.5 * np.finfo(float).eps * a):
                break
            a, b = 0.5 * (a + b), np.sqrt(a * b)
            pow2 *= 2.0
            c2_sum += 0.5 * pow2 * c * c
        out[interior] = (np.pi / (2.0 * a)) * (1.0 - c2_sum)

    return float(out[0]) if scalar else out


def kernel_modulus(r, rp):
    """Modulus gamma = 2*sqrt(r*r')/(r + r') of the radial dispersion kernel.

    Symmetric in (r, r'), equal to 1 iff r = r' > 0, and 0 when either
    radius vanishes.  Broadcasts over array arguments.
    """
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    if np.any(r < 0) or np.any(rp < 0):
        raise ValueError("radii must be nonnegative")
    s = r + rp
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(s > 0.0, 2.0 * np.sqrt(r * rp) / np.where(s > 0.0, s, 1.0), 0.0)
    # guard roundoff just above 1 on the diagonal
    return np.minimum(g, 1.0)
