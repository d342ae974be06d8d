"""Digamma function for the Beta/Dirichlet expectations of the variational family."""

import numpy as np

# Below this the recurrence psi(x) = psi(x + 1) - 1/x is applied before the
# asymptotic series; at x >= 10 the truncated series error is below 1e-16.
_SHIFT_THRESHOLD = 10.0

# B_{2n} / (2n) for n = 1..7
_ASYMPTOTIC_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """Digamma (psi) function for positive arguments.

    Works elementwise on scalars and arrays. Small arguments are shifted
    upwards with the recurrence, then the asymptotic expansion

        psi(x) ~ log(x) - 1/(2x) - sum_n B_{2n} / (2n x^{2n})

    is evaluated. Accurate to about 1e-14 over (0, inf).

    Raises
    ------
    ValueError
        If any argument is not strictly positive.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("digamma is only defined here for x > 0")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < _SHIFT_THRESHOLD
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < _SHIFT_THRESHOLD
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_ASYMPTOTIC_COEFFS):
        series = (series + c) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    if np.ndim(x) == 0:
        return float(out)
    return out
