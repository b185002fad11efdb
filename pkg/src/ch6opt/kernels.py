"""Backend selection for the pointwise kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
(or when ``CH6OPT_PURE_PYTHON`` is set in the environment) the numpy
implementation in ``_pykernels`` is used.  ``use()`` switches at runtime,
which the tests and the benchmark rely on.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["available", "backend", "use", "get"]

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _pykernels if (_ckernels is None or os.environ.get("CH6OPT_PURE_PYTHON")) else _ckernels


def available():
    return tuple(_BACKENDS)


def backend():
    return _active.NAME


def get(name=None):
    if name is None:
        return _active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available (have {available()})") from None


def use(name):
    """Activate a backend by name and return the previously active name."""
    global _active
    prev = _active.NAME
    _active = get(name)
    return prev


def poly_derivs(c, x, nder):
    return _active.poly_derivs(c, x, nder)


def state_terms(fc, nu, phi, lap_phi):
    return _active.state_terms(fc, nu, phi, lap_phi)


def frozen_terms(fc, phi, lap_phi):
    return _active.frozen_terms(fc, phi, lap_phi)


def lin_terms(nu, zeta, xi, psi, lap_psi):
    return _active.lin_terms(nu, zeta, xi, psi, lap_psi)


def adj_terms(nu, zeta, xi, q, bilap_p):
    return _active.adj_terms(nu, zeta, xi, q, bilap_p)


def imex_update(x, expl, src, shift, inv_denom, dt):
    return _active.imex_update(x, expl, src, shift, inv_denom, dt)
