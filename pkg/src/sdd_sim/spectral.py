"""Dirichlet Laplacian on (0, L) in its sine eigenbasis.

States are stored as modal coefficient vectors ``v_k = <v, e_k>`` with
``e_k(x) = sqrt(2/L) sin(k pi x / L)``.  The quadrature grid is the interior
of a uniform partition of [0, L] into ``n_grid + 1`` cells, on which the
discrete sine functions are exactly orthogonal for ``k <= n_grid``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

ModalVector = np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralOperator:
    length: float
    n_modes: int
    n_grid: int
    eigenvalues: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)
    # basis[j, k] = e_{k+1}(grid[j])
    basis: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return self.length / (self.n_grid + 1)

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def volume(self) -> float:
        """|Omega|, the length of the interval."""
        return self.length

    def eigenfunction(self, k: int, x) -> np.ndarray:
        """Evaluate e_k (1-based k) at arbitrary points."""
        x = np.asarray(x, dtype=float)
        return np.sqrt(2.0 / self.length) * np.sin(k * np.pi * x / self.length)

    def evaluate(self, v: ModalVector, x) -> np.ndarray:
        """Pointwise value of the modal field at arbitrary x in [0, L]."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.arange(1, self.n_modes + 1)
        table = np.sqrt(2.0 / self.length) * np.sin(np.outer(x, k) * np.pi / self.length)
        return table @ np.asarray(v, dtype=float)


def build_dirichlet_laplacian_1d(length: float, n_modes: int, n_grid: int | None = None) -> SpectralOperator:
    """Build -d²/dx² on (0, length) with homogeneous Dirichlet conditions.

    ``n_grid`` defaults to ``4 * n_modes``; it must be at least ``2 * n_modes``.
    """
    if not length > 0:
        raise InvalidArgument(f"domain length must be positive, got {length}")
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidArgument(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    if n_grid is None:
        n_grid = 4 * n_modes
    if int(n_grid) != n_grid or n_grid < 2 * n_modes:
        raise InvalidArgument(f"n_grid must be an integer >= 2*n_modes={2 * n_modes}, got {n_grid}")
    n_grid = int(n_grid)
    k = np.arange(1, n_modes + 1, dtype=float)
    lam = (k * np.pi / length) ** 2
    x = np.arange(1, n_grid + 1) * (length / (n_grid + 1))
    basis = np.sqrt(2.0 / length) * np.sin(np.outer(np.arange(1, n_grid + 1), k) * np.pi / (n_grid + 1))
    return SpectralOperator(
        length=float(length),
        n_modes=n_modes,
        n_grid=n_grid,
        eigenvalues=_frozen(lam),
        grid=_frozen(x),
        basis=_frozen(basis),
    )


def apply_semigroup(op: SpectralOperator, d: float, t: float, v: ModalVector) -> ModalVector:
    """Return exp(-(A + d) t) v."""
    if t < 0:
        raise InvalidArgument(f"semigroup time must be nonnegative, got {t}")
    if d < 0:
        raise InvalidArgument(f"damping must be nonnegative, got {d}")
    return np.exp(-(op.eigenvalues + d) * t) * np.asarray(v, dtype=float)


def frac_power_norm(op: SpectralOperator, delta: float, v: ModalVector) -> float:
    """||A^delta v|| = sqrt(sum lambda_k^(2 delta) v_k^2)."""
    if not 0.0 <= delta <= 1.0:
        raise InvalidArgument(f"fractional power must lie in [0, 1], got {delta}")
    v = np.asarray(v, dtype=float)
    if delta == 0.0:
        return float(np.linalg.norm(v))
    return float(np.sqrt(np.sum(op.eigenvalues ** (2.0 * delta) * v * v)))


def frac_power_norms(op: SpectralOperator, delta: float, states: np.ndarray) -> np.ndarray:
    """Row-wise ||A^delta v|| for a stack of modal vectors."""
    if not 0.0 <= delta <= 1.0:
        raise InvalidArgument(f"fractional power must lie in [0, 1], got {delta}")
    states = np.asarray(states, dtype=float)
    w = op.eigenvalues ** (2.0 * delta)
    return np.sqrt(np.sum(w * states * states, axis=-1))


def to_modal(op: SpectralOperator, nodal) -> ModalVector:
    """Project grid values onto e_1..e_N by the discrete inner product."""
    nodal = np.asarray(nodal, dtype=float)
    if nodal.shape[-1] != op.n_grid:
        raise InvalidArgument(f"expected {op.n_grid} nodal values, got {nodal.shape[-1]}")
    return (nodal @ op.basis) * op.dx


def to_nodal(op: SpectralOperator, v: ModalVector) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != op.n_modes:
        raise InvalidArgument(f"expected {op.n_modes} modal coefficients, got {v.shape[-1]}")
    return v @ op.basis.T


def nodal_norm(op: SpectralOperator, nodal) -> float:
    """Discrete L² norm on the quadrature grid (boundary values are zero)."""
    nodal = np.asarray(nodal, dtype=float)
    return float(np.sqrt(np.sum(nodal * nodal) * op.dx))


def tail_ratio(v: ModalVector) -> float:
    """|v_N| / ||v||, a cheap truncation monitor."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    return float(abs(v[-1]) / n) if n > 0 else 0.0
