"""Neumann cosine eigenbasis on axis-aligned boxes.

Fields are stored by their coefficients in the L2-orthonormal eigenbasis of
the Neumann Laplacian on ``[0, L_1] x ... x [0, L_d]``::

    e_k(x) = prod_i c_{k_i} cos(pi k_i x_i / L_i),
    c_0 = sqrt(1 / L_i),   c_k = sqrt(2 / L_i) for k > 0,

with eigenvalues ``omega_k = sum_i (pi k_i / L_i)**2``.  Nodal values live on
the cell-midpoint grid ``x_j = (j + 1/2) L / N``, where the orthonormal
DCT-II/DCT-III pair is exactly the midpoint-rule projection onto the basis.
With this scaling the coefficient vector is independent of the number of
nodes, and Parseval holds without extra factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence, Union

import numpy as np
from scipy import fft as sfft

__all__ = [
    "Grid",
    "SpectralField",
    "GridField",
    "build_grid",
    "to_spectral",
    "to_nodal",
    "laplacian",
    "neumann_inverse",
    "mean",
    "inner_h",
    "norm",
    "GridMismatchError",
]


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


@dataclass(frozen=True)
class Grid:
    """Rectangular domain with a cosine eigenbasis of ``modes`` per axis."""

    dim: int
    lengths: tuple[float, ...]
    modes: tuple[int, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.modes

    @cached_property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for L, n in zip(self.lengths, self.modes)]))

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        """Per-axis midpoint nodes."""
        return tuple((np.arange(n) + 0.5) * (L / n) for L, n in zip(self.lengths, self.modes))

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.nodes, indexing="ij"))

    @cached_property
    def axis_eigenvalues(self) -> tuple[np.ndarray, ...]:
        return tuple((np.pi * np.arange(n) / L) ** 2 for L, n in zip(self.lengths, self.modes))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """``omega_k`` on the full multi-index array (read-only)."""
        om = np.zeros(self.modes)
        for axis, lam in enumerate(self.axis_eigenvalues):
            shape = [1] * self.dim
            shape[axis] = lam.size
            om = om + lam.reshape(shape)
        om.setflags(write=False)
        return om

    @cached_property
    def _axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.modes)

    def constant(self, c: float) -> "SpectralField":
        coeffs = self.zeros()
        coeffs[(0,) * self.dim] = c * np.sqrt(self.volume)
        return SpectralField(self, coeffs)

    def evaluate(self, func) -> "GridField":
        """Sample ``func(*mesh)`` on the nodal grid."""
        values = np.broadcast_to(np.asarray(func(*self.mesh), dtype=float), self.modes)
        return GridField(self, np.array(values))

    # Raw transforms.  ``batch`` leading axes are passed through untouched.

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Nodal values -> orthonormal coefficients."""
        out = sfft.dctn(values, type=2, norm="ortho", axes=self._axes)
        out *= np.sqrt(self.cell_volume)
        return out

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Orthonormal coefficients -> nodal values."""
        out = sfft.idctn(coeffs, type=2, norm="ortho", axes=self._axes)
        out *= 1.0 / np.sqrt(self.cell_volume)
        return out

    def padded(self, factor: float = 1.5) -> "Grid":
        modes = tuple(int(np.ceil(factor * n)) for n in self.modes)
        return Grid(self.dim, self.lengths, modes)

    def inverse_padded(self, coeffs: np.ndarray, fine: "Grid") -> np.ndarray:
        """Evaluate coefficients on the nodes of a finer grid (zero padding)."""
        lead = coeffs.shape[: coeffs.ndim - self.dim]
        big = np.zeros(lead + fine.modes)
        big[(Ellipsis,) + tuple(slice(0, n) for n in self.modes)] = coeffs
        return fine.inverse(big)

    def forward_truncated(self, values: np.ndarray, fine: "Grid") -> np.ndarray:
        """Project fine-grid nodal values onto this grid's modes."""
        big = fine.forward(values)
        return np.ascontiguousarray(big[(Ellipsis,) + tuple(slice(0, n) for n in self.modes)])


def build_grid(dim: int, lengths: Sequence[float], modes: Union[int, Sequence[int]]) -> Grid:
    """Build a ``dim``-dimensional box grid.

    ``modes`` may be a single count used on every axis.

    Raises
    ------
    ValueError
        If ``dim`` is not 1, 2 or 3, a length is not positive, or fewer than
        two modes are requested on some axis.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    if np.ndim(modes) == 0:
        modes = (int(modes),) * dim
    modes = tuple(int(n) for n in modes)
    if len(modes) == 1 and dim > 1:
        modes = modes * dim
    if len(lengths) == 1 and dim > 1:
        lengths = lengths * dim
    if len(lengths) != dim or len(modes) != dim:
        raise ValueError(f"need {dim} lengths and mode counts, got {lengths} and {modes}")
    if not all(np.isfinite(L) and L > 0 for L in lengths):
        raise ValueError(f"lengths must be positive, got {lengths}")
    if any(n < 2 for n in modes):
        raise ValueError(f"at least 2 modes per axis are required, got {modes}")
    return Grid(dim, lengths, modes)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficients of a scalar field in the orthonormal cosine basis."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != self.grid.modes:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.modes}")
        object.__setattr__(self, "coeffs", c)

    def _check(self, other):
        if isinstance(other, SpectralField) and other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs - other.coeffs)
        return NotImplemented

    def __mul__(self, scalar):
        if np.ndim(scalar) == 0:
            return SpectralField(self.grid, float(scalar) * self.coeffs)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def nodal(self) -> "GridField":
        return to_nodal(self)


@dataclass(frozen=True, eq=False)
class GridField:
    """Nodal values on the midpoint collocation grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.modes:
            raise ValueError(f"value shape {v.shape} does not match grid {self.grid.modes}")
        object.__setattr__(self, "values", v)

    def spectral(self) -> SpectralField:
        return to_spectral(self)


AnyField = Union[SpectralField, GridField]


def _coeffs(f: AnyField) -> np.ndarray:
    return f.coeffs if isinstance(f, SpectralField) else to_spectral(f).coeffs


def to_spectral(f: GridField) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("nodal field contains non-finite values")
    return SpectralField(f.grid, f.grid.forward(f.values))


def to_nodal(f: SpectralField) -> GridField:
    if not np.all(np.isfinite(f.coeffs)):
        raise ValueError("spectral field contains non-finite coefficients")
    return GridField(f.grid, f.grid.inverse(f.coeffs))


def laplacian(f: SpectralField, power: int = 1) -> SpectralField:
    """Apply the Neumann Laplacian ``power`` times (coefficient-wise)."""
    if power not in (1, 2, 3):
        raise ValueError(f"power must be 1, 2 or 3, got {power}")
    return SpectralField(f.grid, (-f.grid.eigenvalues) ** power * f.coeffs)


def neumann_inverse(f: SpectralField, center: bool = False, tol: float = 1e-10) -> SpectralField:
    """Solve ``-lap z = f`` with Neumann conditions and zero-mean ``z``.

    Parameters
    ----------
    f : SpectralField
        Right-hand side.  Must have zero mean unless ``center`` is set.
    center : bool
        Subtract the mean of ``f`` first, i.e. return ``N(f - mean(f))``.
    tol : float
        Admissible size of the mean coefficient relative to the field norm.
    """
    c = f.coeffs.copy()
    zero = (0,) * f.grid.dim
    if not center:
        scale = float(np.sqrt(np.sum(c * c)))
        if abs(c[zero]) > tol * scale:
            raise ValueError(
                "neumann_inverse needs a zero-mean right-hand side (pass center=True to subtract the mean)"
            )
    c[zero] = 0.0
    om = f.grid.eigenvalues
    out = np.zeros_like(c)
    nz = om > 0
    out[nz] = c[nz] / om[nz]
    return SpectralField(f.grid, out)


def mean(f: AnyField) -> float:
    """Mean value over the domain."""
    if isinstance(f, GridField):
        return float(np.sum(f.values) / f.values.size)
    return float(f.coeffs[(0,) * f.grid.dim] / np.sqrt(f.grid.volume))


def inner_h(a: AnyField, b: AnyField) -> float:
    """L2 inner product."""
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    return float(np.sum(_coeffs(a) * _coeffs(b)))


def norm(f: AnyField, which: Literal["H", "V", "Vstar", "Linf"] = "H") -> float:
    """Norm of a field.

    ``H`` is the L2 norm, ``V`` the H1 norm, ``Vstar`` the dual norm
    ``|grad N(v - mean v)|^2 + |mean v|^2`` and ``Linf`` the nodal maximum.
    """
    if which == "Linf":
        values = f.values if isinstance(f, GridField) else to_nodal(f).values
        return float(np.max(np.abs(values)))
    c = _coeffs(f)
    om = f.grid.eigenvalues
    if which == "H":
        return float(np.sqrt(np.sum(c * c)))
    if which == "V":
        return float(np.sqrt(np.sum((1.0 + om) * c * c)))
    if which == "Vstar":
        nz = om > 0
        m = c[(0,) * f.grid.dim] / np.sqrt(f.grid.volume)
        return float(np.sqrt(np.sum(c[nz] ** 2 / om[nz]) + m * m))
    raise ValueError(f"unknown norm {which!r}")
