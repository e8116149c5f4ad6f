"""Finite-difference Laplacian and bilaplacian with clamped ends.

Both operators act on the ``n`` interior nodes of a uniform grid with spacing
``h = length / (n + 1)``. The clamped condition ``u = u' = 0`` is imposed by a
zero boundary node and the ghost reflection ``u[-1] = u[1]``, which turns the
first and last rows of the five-point stencil ``(1, -4, 6, -4, 1) / h⁴`` into
``(7, -4, 1) / h⁴``.

All inner products are rectangle-rule quadratures ``h * sum(a * b)``. Since
the symmetric matrices are self-adjoint for that weight as well, eigenvalues
are the ordinary matrix eigenvalues; eigenvectors are rescaled by ``1/sqrt(h)``
to be orthonormal in the weighted product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from .errors import ConvergenceFailure, LengthMismatch


@dataclass(frozen=True)
class EigenData:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, h-orthonormal


@dataclass(frozen=True)
class DiscreteOperators:
    length: float
    n: int
    h: float
    lap: np.ndarray
    bilap: np.ndarray
    kappa: float = 0.0
    stiffness_eigs: EigenData | None = None

    @property
    def neg_lap(self) -> np.ndarray:
        return -self.lap

    @property
    def stiffness(self) -> np.ndarray:
        return self.bilap - self.kappa * self.lap


def assemble_operators(length: float, n: int, kappa: float = 0.0, with_eigs: bool = True) -> DiscreteOperators:
    if n < 3:
        raise ValueError(f"need at least 3 interior nodes, got n={n}")
    if not length > 0:
        raise ValueError(f"length must be positive, got {length}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    h = length / (n + 1)
    lap_unit, bilap_unit = _unit_stencils(n)
    lap = lap_unit / h**2
    bilap = bilap_unit / h**4

    for a in (lap, bilap):
        a.flags.writeable = False
    ops = DiscreteOperators(length=float(length), n=n, h=h, lap=lap, bilap=bilap, kappa=float(kappa))
    if with_eigs:
        eigs = _banded_eigh(ops.stiffness, bandwidth=2, h=h)
        ops = DiscreteOperators(ops.length, n, h, lap, bilap, float(kappa), eigs)
    return ops


def _unit_stencils(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer stencils for unit spacing: ``(lap * h², bilap * h⁴)``."""
    lap = np.diag(np.full(n - 1, 1.0), -1) + np.diag(np.full(n, -2.0)) + np.diag(np.full(n - 1, 1.0), 1)
    main = np.full(n, 6.0)
    main[0] = main[-1] = 7.0
    bilap = (
        np.diag(main)
        + np.diag(np.full(n - 1, -4.0), 1)
        + np.diag(np.full(n - 1, -4.0), -1)
        + np.diag(np.ones(n - 2), 2)
        + np.diag(np.ones(n - 2), -2)
    )
    return lap, bilap


def _to_upper_banded(a: np.ndarray, bandwidth: int) -> np.ndarray:
    n = a.shape[0]
    ab = np.zeros((bandwidth + 1, n))
    for k in range(bandwidth + 1):
        ab[bandwidth - k, k:] = np.diagonal(a, k)
    return ab


def _banded_eigh(a: np.ndarray, bandwidth: int, h: float, select_first: int | None = None) -> EigenData:
    ab = _to_upper_banded(a, bandwidth)
    try:
        if select_first is None:
            w, v = linalg.eig_banded(ab, lower=False, check_finite=True)
        else:
            w, v = linalg.eig_banded(ab, lower=False, select="i", select_range=(0, select_first - 1))
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"banded eigensolver failed: {exc}") from exc
    return EigenData(w, v / math.sqrt(h))


def h_inner(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """Rectangle-rule L² inner product ``h * sum(a * b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"vectors have shapes {a.shape} and {b.shape}")
    return float(h * np.dot(a, b))


def bilap_eigendecomposition(ops: DiscreteOperators) -> tuple[np.ndarray, np.ndarray]:
    eig = _banded_eigh(ops.bilap, 2, ops.h)
    return eig.values, eig.vectors


def lap_eigendecomposition(ops: DiscreteOperators) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``-lap`` (ascending, h-orthonormal)."""
    eig = _banded_eigh(ops.neg_lap, 1, ops.h)
    return eig.values, eig.vectors


def biharmonic_min_eigenvalue(ops: DiscreteOperators) -> float:
    """Smallest eigenvalue Λ₁ of the clamped bilaplacian.

    It gives the best constant in ``||u|| <= Λ₁^(-1/2) ||Δu||``. The solve runs
    on the unit-spacing stencil, so the result scales exactly as ``length⁻⁴``.
    """
    _, bilap_unit = _unit_stencils(ops.n)
    return float(_banded_eigh(bilap_unit, 2, 1.0, select_first=1).values[0]) / ops.h**4


def embedding_constant(ops: DiscreteOperators) -> float:
    """``d = Λ₁^(-1/2)``, so that ``||u|| <= d ||Δu||``."""
    return biharmonic_min_eigenvalue(ops) ** -0.5


def gradient_embedding_constant(ops: DiscreteOperators) -> float:
    """Smallest ``c'`` with ``||∇u||² <= c' ||Δu||²`` on the discrete space.

    This is the top eigenvalue of the pencil ``(-lap) u = μ bilap u``.
    """
    n = ops.n
    lap_unit, bilap_unit = _unit_stencils(n)
    try:
        mu = linalg.eigh(-lap_unit, bilap_unit, eigvals_only=True, subset_by_index=[n - 1, n - 1])
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"generalized eigensolver failed: {exc}") from exc
    return float(mu[0]) * ops.h**2


def stiffness_eigendecomposition(ops: DiscreteOperators, kappa: float) -> EigenData:
    """Eigenpairs of ``bilap + kappa * (-lap)``; reuses the cached ones when possible."""
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if ops.stiffness_eigs is not None and ops.kappa == kappa:
        return ops.stiffness_eigs
    return _banded_eigh(ops.bilap - kappa * ops.lap, 2, ops.h)


def clamped_beam_root() -> float:
    """First positive root β₁ of ``cos β cosh β = 1`` (≈ 4.73004)."""
    return brentq(lambda b: math.cos(b) * math.cosh(b) - 1.0, 4.0, 5.0, xtol=1e-14)


def continuum_min_eigenvalue(length: float) -> float:
    """Λ₁ of the continuous clamped bilaplacian on ``(0, length)``."""
    return (clamped_beam_root() / length) ** 4
