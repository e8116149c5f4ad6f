"""Energies and right-hand sides of the damped beam.

With ``lap`` the discrete Laplacian (negative definite) the semi-discrete
system reads

    u' = v
    v' = -bilap u + kappa lap u - alpha C(u, v) v          (frictional)
    v' = -bilap u + kappa lap u + alpha C(u, v) lap v      (strong)

where ``C = (||Δu||² + ||v||²)^q`` and ``||Δu||² = <bilap u, u>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EnergyBreakdown, ModelParams, State
from .errors import BallViolation, IdenticalStates, NonFiniteState
from .operators import DiscreteOperators


@dataclass(frozen=True)
class RhsOutput:
    du: np.ndarray
    dv: np.ndarray


def bilap_sq(u: np.ndarray, ops: DiscreteOperators) -> float:
    return float(ops.h * u @ (ops.bilap @ u))


def grad_sq(u: np.ndarray, ops: DiscreteOperators) -> float:
    return float(-ops.h * u @ (ops.lap @ u))


def l2_sq(v: np.ndarray, ops: DiscreteOperators) -> float:
    return float(ops.h * v @ v)


def phase_norm_sq(s: State, ops: DiscreteOperators) -> float:
    """``||z||²_H = ||Δu||² + ||v||²``."""
    return bilap_sq(s.u, ops) + l2_sq(s.v, ops)


def nonlocal_coefficient(s: State, ops: DiscreteOperators, q: float) -> float:
    return phase_norm_sq(s, ops) ** q


def energy(s: State, ops: DiscreteOperators, kappa: float, q: float) -> EnergyBreakdown:
    b = bilap_sq(s.u, ops)
    w = l2_sq(s.v, ops)
    g = grad_sq(s.u, ops)
    return EnergyBreakdown(
        e_total=0.5 * (b + w + kappa * g),
        bilap_sq=b,
        vel_sq=w,
        grad_sq=g,
        coeff=(b + w) ** q,
    )


def rhs(s: State, ops: DiscreteOperators, p: ModelParams) -> RhsOutput:
    return RhsOutput(*rhs_arrays(s.u, s.v, ops, p))


def rhs_arrays(u: np.ndarray, v: np.ndarray, ops: DiscreteOperators, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`rhs`, without building a :class:`State`."""
    bu = ops.bilap @ u
    dv = -bu
    if p.kappa:
        dv = dv + p.kappa * (ops.lap @ u)
    if p.alpha:
        coeff = (ops.h * (u @ bu + v @ v)) ** p.q
        if p.variant == "frictional":
            dv = dv - p.alpha * coeff * v
        else:
            dv = dv + p.alpha * coeff * (ops.lap @ v)
    if not np.all(np.isfinite(dv)):
        raise NonFiniteState("right-hand side produced non-finite values")
    return v.copy(), dv


def dissipation_rate(s: State, ops: DiscreteOperators, p: ModelParams) -> float:
    """Instantaneous energy loss ``-dE/dt`` (non-negative)."""
    if p.alpha == 0:
        return 0.0
    coeff = nonlocal_coefficient(s, ops, p.q)
    if p.variant == "frictional":
        return p.alpha * coeff * l2_sq(s.v, ops)
    return p.alpha * coeff * grad_sq(s.v, ops)


def nonlinear_part(s: State, ops: DiscreteOperators, p: ModelParams) -> np.ndarray:
    """Velocity component of ``M(z) = (0, kappa Δu - alpha ||z||^(2q) v)``."""
    return p.kappa * (ops.lap @ s.u) - p.alpha * phase_norm_sq(s, ops) ** p.q * s.v


def lipschitz_bound(p: ModelParams, r: float) -> float:
    return p.kappa + 2.0 * (2.0 * p.q + 1.0) * p.alpha * r ** (2.0 * p.q)


def lipschitz_ratio(z1: State, z2: State, ops: DiscreteOperators, p: ModelParams, r: float) -> tuple[float, float]:
    """Ratio ``||M(z1) - M(z2)||_H / ||z1 - z2||_H`` and its a-priori bound.

    Both states must lie in the closed H-ball of radius ``r``.
    """
    for name, z in (("z1", z1), ("z2", z2)):
        norm = phase_norm_sq(z, ops) ** 0.5
        if norm > r * (1 + 1e-12):
            raise BallViolation(f"{name} has H-norm {norm} > r = {r}")
    diff = State(z1.u - z2.u, z1.v - z2.v)
    denom = phase_norm_sq(diff, ops) ** 0.5
    if denom == 0.0:
        raise IdenticalStates("z1 and z2 coincide")
    dm = nonlinear_part(z1, ops, p) - nonlinear_part(z2, ops, p)
    return l2_sq(dm, ops) ** 0.5 / denom, lipschitz_bound(p, r)
