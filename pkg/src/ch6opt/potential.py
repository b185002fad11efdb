"""Polynomial double-well potentials and their convex split.

Every potential is written as ``F(s) = beta_hat(s) - lam/2 s**2`` with
``beta = beta_hat'``, so ``f = F' = beta - lam s``.  The solvers only need
``f`` and its derivatives, which for the supported kinds are polynomials; the
coefficient vector of ``f`` is what the compiled kernels consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "Potential",
    "ModelParams",
    "ValidationReport",
    "Check",
    "PotentialError",
    "make_potential",
    "eval_gamma",
    "eval_g",
    "validate_assumptions",
]

KINDS = ("quartic", "polynomial", "linear-test")


class PotentialError(ValueError):
    """A potential violates one of the structural assumptions."""


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    c_beta: float
    interval: tuple[float, float]
    verification_only: bool = False

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            w = "" if c.witness is None else f" (witness s={c.witness:.6g})"
            out.append(f"[{tag}] {c.name}: {c.detail}{w}")
        out.append(f"fitted C_beta = {self.c_beta:.6g} on [{self.interval[0]:g}, {self.interval[1]:g}]")
        if self.verification_only:
            out.append("note: verification mode only, not admissible for production runs")
        return out


@dataclass(frozen=True, eq=False)
class Potential:
    """Polynomial potential with explicit split parameter ``lam``.

    ``coeffs`` holds the coefficients of ``F`` in increasing powers.
    """

    kind: str
    coeffs: np.ndarray = field(repr=False)
    lam: float
    report: ValidationReport | None = field(default=None, repr=False, compare=False)

    @property
    def verification_only(self) -> bool:
        return self.kind == "linear-test"

    def _deriv(self, m: int) -> np.ndarray:
        c = P.polyder(self.coeffs, m) if m else self.coeffs
        return np.atleast_1d(c) if len(c) else np.zeros(1)

    @property
    def f_coeffs(self) -> np.ndarray:
        """Coefficients of ``f = F'`` (kernel input)."""
        return np.ascontiguousarray(self._deriv(1), dtype=float)

    def F(self, s):
        return P.polyval(s, self.coeffs)

    def f(self, s):
        return P.polyval(s, self._deriv(1))

    def df(self, s):
        return P.polyval(s, self._deriv(2))

    def d2f(self, s):
        return P.polyval(s, self._deriv(3))

    def d3f(self, s):
        return P.polyval(s, self._deriv(4))

    def beta(self, s):
        return self.f(s) + self.lam * np.asarray(s)

    def dbeta(self, s):
        return self.df(s) + self.lam

    def d2beta(self, s):
        return self.d2f(s)

    def d3beta(self, s):
        return self.d3f(s)


@dataclass(frozen=True)
class ModelParams:
    """Everything defining the state equation apart from the control.

    ``sigma = 0`` is accepted for conservative test runs; the linear-test
    potential additionally requires ``test_mode``.
    """

    sigma: float
    nu: float
    potential: Potential
    test_mode: bool = False

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not np.isfinite(self.nu):
            raise ValueError("nu must be finite")
        if self.potential.verification_only and not self.test_mode:
            raise PotentialError("the linear-test potential is for verification only; set test_mode=True")


def make_potential(kind: str = "quartic", coeffs: Sequence[float] | None = None, lam: float | None = None,
                   interval: float = 10.0) -> Potential:
    """Construct and validate a potential.

    Parameters
    ----------
    kind : {"quartic", "polynomial", "linear-test"}
        ``quartic`` is ``(s**2 - 1)**2 / 4`` with ``lam = 1`` (so ``beta = s**3``).
        ``polynomial`` takes the coefficients of ``F`` in increasing powers.
        ``linear-test`` is ``F = 0``; it breaks the superlinear growth
        assumption and exists only for exact single-mode checks.
    coeffs : sequence of float, optional
        Coefficients of ``F`` for the polynomial kind.
    lam : float, optional
        Split parameter; defaults to 1 for quartic and 0 otherwise.
    interval : float
        Half-width ``S`` of the sampling interval for the assumption checks.

    Raises
    ------
    PotentialError
        If a polynomial potential fails ``beta(0) = 0``, ``beta''(0) = 0``,
        ``beta''' >= 0`` on the sample interval, or the degree/leading term
        requirement.
    """
    if kind == "quartic":
        c = np.array([0.25, 0.0, -0.5, 0.0, 0.25])
        lam = 1.0 if lam is None else float(lam)
    elif kind == "polynomial":
        if coeffs is None:
            raise PotentialError("polynomial potential needs coefficients")
        c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if not np.all(np.isfinite(c)):
            raise PotentialError("polynomial coefficients must be finite")
        deg = len(c) - 1
        if deg < 4 or deg % 2 or c[-1] <= 0:
            raise PotentialError(
                f"polynomial potential needs even degree >= 4 with positive leading coefficient, got degree {deg}"
            )
        lam = 0.0 if lam is None else float(lam)
    elif kind == "linear-test":
        c = np.zeros(1)
        lam = 0.0 if lam is None else float(lam)
    else:
        raise ValueError(f"unknown potential kind {kind!r}, expected one of {KINDS}")
    if not np.isfinite(lam) or lam < 0:
        raise PotentialError(f"lambda must be >= 0, got {lam}")

    pot = Potential(kind, c, lam)
    report = validate_assumptions(pot, (-interval, interval))
    if kind == "polynomial" and not report.ok:
        bad = report.failed()[0]
        w = "" if bad.witness is None else f" at s={bad.witness:.6g}"
        raise PotentialError(f"assumption {bad.name} violated{w}: {bad.detail}")
    if kind == "quartic" and lam != 1.0 and not report.ok:
        raise PotentialError(f"quartic split with lambda={lam} violates {report.failed()[0].name}")
    return Potential(kind, c, lam, report)


def eval_gamma(pot: Potential, s):
    """``gamma = beta * beta'``."""
    return pot.beta(s) * pot.dbeta(s)


def eval_g(pot: Potential, nu: float, s):
    """``g(s) = -lam s beta'(s) + (nu - lam) beta(s) + (lam**2 - lam nu) s``."""
    lam = pot.lam
    s = np.asarray(s, dtype=float)
    return -lam * s * pot.dbeta(s) + (nu - lam) * pot.beta(s) + (lam * lam - lam * nu) * s


def validate_assumptions(pot: Potential, interval: tuple[float, float] = (-10.0, 10.0),
                         samples: int = 20001) -> ValidationReport:
    """Sample the structural assumptions on a finite interval.

    Checks ``beta(0) = 0``, ``beta''(0) = 0``, ``beta''' >= 0``, a
    superlinear growth proxy for ``beta'``, the growth bound
    ``|beta''| <= C (|beta'| + 1)`` (reporting the smallest sampled ``C``),
    and that ``F`` is bounded below.
    """
    lo, hi = map(float, interval)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < 0 < hi):
        raise ValueError(f"sample interval must be finite and contain 0, got {interval}")
    s = np.linspace(lo, hi, samples)
    scale = 1.0 + float(np.max(np.abs(pot.coeffs)))
    checks = []

    b0 = float(pot.beta(0.0))
    checks.append(Check("beta(0)=0", abs(b0) <= 1e-12 * scale, f"beta(0) = {b0:.3g}"))
    b20 = float(pot.d2beta(0.0))
    checks.append(Check("beta''(0)=0", abs(b20) <= 1e-12 * scale, f"beta''(0) = {b20:.3g}"))

    b3 = np.atleast_1d(pot.d3beta(s)) * np.ones_like(s)
    i = int(np.argmin(b3))
    ok = b3[i] >= -1e-12 * scale
    checks.append(Check("beta'''>=0", ok, f"min beta''' = {b3[i]:.6g}", None if ok else float(s[i])))

    S = min(-lo, hi)
    grow_far = min(float(pot.dbeta(S)), float(pot.dbeta(-S))) / S
    grow_near = max(abs(float(pot.dbeta(1.0))), abs(float(pot.dbeta(-1.0))), 1e-300)
    ok = S > 1.0 and grow_far >= 2.0 * grow_near
    checks.append(Check("beta' superlinear", ok,
                        f"beta'(S)/S = {grow_far:.6g} vs beta'(1) = {grow_near:.6g} (S = {S:g})"))

    db = np.atleast_1d(pot.dbeta(s)) * np.ones_like(s)
    d2b = np.atleast_1d(pot.d2beta(s)) * np.ones_like(s)
    ratio = np.abs(d2b) / (np.abs(db) + 1.0)
    c_beta = float(np.max(ratio))
    checks.append(Check("|beta''|<=C(|beta'|+1)", np.isfinite(c_beta), f"C_beta = {c_beta:.6g}"))

    c = pot.coeffs
    deg = len(np.trim_zeros(c, "b")) - 1
    if deg <= 0:
        ok = True
    else:
        ok = deg % 2 == 0 and np.trim_zeros(c, "b")[-1] > 0
    Fmin = float(np.min(pot.F(s) * np.ones_like(s)))
    checks.append(Check("F bounded below", bool(ok), f"min F on interval = {Fmin:.6g}"))

    return ValidationReport(tuple(checks), c_beta, (lo, hi), pot.verification_only)
