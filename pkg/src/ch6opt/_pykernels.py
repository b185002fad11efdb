"""Pure numpy implementation of the fused pointwise kernels.

Mirrors ``_ckernels.pyx`` function for function.  All array arguments are
flat, contiguous float64; results are fresh arrays.
"""

import numpy as np

NAME = "python"


def _horner2(c, x):
    """Value and first derivative of sum c[i] x**i."""
    p = np.full_like(x, c[-1])
    dp = np.zeros_like(x)
    for a in c[-2::-1]:
        dp = dp * x + p
        p = p * x + a
    return p, dp


def _horner3(c, x):
    """Value, first and second derivative of sum c[i] x**i."""
    p = np.full_like(x, c[-1])
    dp = np.zeros_like(x)
    d2p = np.zeros_like(x)
    for a in c[-2::-1]:
        d2p = d2p * x + 2.0 * dp
        dp = dp * x + p
        p = p * x + a
    return p, dp, d2p


def poly_derivs(c, x, nder):
    """Rows ``p, p', ..., p^(nder)`` of the polynomial at ``x``."""
    out = np.zeros((nder + 1, x.size))
    n = len(c)
    for m in range(nder + 1):
        cm = np.array([c[i] * np.prod(np.arange(i - m + 1, i + 1)) for i in range(m, n)])
        if cm.size == 0:
            continue
        acc = np.full_like(x, cm[-1])
        for a in cm[-2::-1]:
            acc = acc * x + a
        out[m] = acc
    return out


def state_terms(fc, nu, phi, lap_phi):
    """``f(phi)`` and ``(f'(phi) + nu) (f(phi) - lap phi)``."""
    fv, dfv = _horner2(fc, phi)
    return fv, (dfv + nu) * (fv - lap_phi)


def frozen_terms(fc, phi, lap_phi):
    """``f'(phi)`` and ``f''(phi) (f(phi) - lap phi)``."""
    fv, dfv, d2fv = _horner3(fc, phi)
    return dfv, d2fv * (fv - lap_phi)


def lin_terms(nu, zeta, xi, psi, lap_psi):
    """``zeta psi`` and ``xi psi + (zeta + nu) (zeta psi - lap psi)``."""
    a = zeta * psi
    return a, xi * psi + (zeta + nu) * (a - lap_psi)


def adj_terms(nu, zeta, xi, q, bilap_p):
    """``(nu + zeta) q``, ``r = bilap p + (nu + zeta) q`` and ``-zeta r - xi q``."""
    a = (zeta + nu) * q
    r = bilap_p + a
    return a, r, -zeta * r - xi * q


def imex_update(x, expl, src, shift, inv_denom, dt):
    """``(x + dt (src + expl + shift x)) * inv_denom``."""
    return (x + dt * (src + expl + shift * x)) * inv_denom
