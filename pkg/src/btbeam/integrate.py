"""Time integration and energy-trace recording.

Two schemes are available:

``modal_split``
    Strang splitting. The conservative beam flow ``u'' = -(bilap - kappa lap) u``
    is advanced exactly by rotating each eigenmode of the stiffness matrix, so
    the step size is not limited by the h⁻⁴ stiffness. The damping flow (with
    ``u`` frozen) is advanced over half steps on either side. For frictional
    damping the velocity only shrinks uniformly, so that half step reduces to
    a scalar equation for ``w = ||v||²`` solved by an implicit midpoint rule.

``rk4``
    Classical explicit Runge-Kutta on the full right-hand side. Stable only
    while ``sqrt(lambda_max) * dt`` stays below about 2.8.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from . import dynamics
from .core import EnergyTrace, ModelParams, State, TraceSample, validate_params
from .envelope import envelope_constants, lower_envelope, upper_envelope
from .errors import EmptyRun, NonFiniteState, SubstepDiverged
from .operators import DiscreteOperators, assemble_operators, lap_eigendecomposition, stiffness_eigendecomposition

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Literal["rk4", "modal_split"] = "modal_split"
    dt: float = 1e-2
    substep_tol: float = 1e-12
    max_substep_iters: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.substep_tol > 0:
            raise ValueError(f"substep_tol must be > 0, got {self.substep_tol}")
        if self.scheme not in ("rk4", "modal_split"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def from_params(cls, p: ModelParams) -> "SchemeConfig":
        return cls(scheme=p.scheme, dt=p.dt)


class ModalSplitter:
    """Strang-split propagator working in stiffness-eigenbasis coordinates.

    ``u = W a`` and ``v = W b`` where ``W`` holds the h-orthonormal stiffness
    eigenvectors, so ``||v||² = b·b`` and the conservative energy is
    ``(λ·a² + b·b) / 2``.
    """

    def __init__(self, ops: DiscreteOperators, p: ModelParams, cfg: SchemeConfig):
        self.ops, self.p, self.cfg = ops, p, cfg
        eig = stiffness_eigendecomposition(ops, p.kappa)
        self.W = eig.vectors
        self.Wt_h = ops.h * eig.vectors.T
        lam = eig.values
        omega = np.sqrt(lam)
        self.cos = np.cos(omega * cfg.dt)
        self.sin_over_omega = np.sin(omega * cfg.dt) / omega
        self.omega_sin = omega * np.sin(omega * cfg.dt)
        # Gram matrix of bilap in modal coordinates; it is diag(lam) when kappa == 0
        if p.kappa:
            self.bilap_form = self.Wt_h @ ops.bilap @ self.W
            self.bilap_form = 0.5 * (self.bilap_form + self.bilap_form.T)
            self.lam = None
        else:
            self.bilap_form = None
            self.lam = lam
        if p.variant == "strong":
            mu, P = lap_eigendecomposition(ops)
            self.mu = mu
            self.T = ops.h * P.T @ self.W  # modal -> gradient eigenbasis, orthogonal
        self.half = 0.5 * cfg.dt

    def to_modal(self, s: State) -> tuple[np.ndarray, np.ndarray]:
        return self.Wt_h @ s.u, self.Wt_h @ s.v

    def from_modal(self, a: np.ndarray, b: np.ndarray, t: float) -> State:
        return State(self.W @ a, self.W @ b, t)

    def bilap_sq(self, a: np.ndarray) -> float:
        if self.lam is not None:
            return float(self.lam @ (a * a))
        return float(a @ (self.bilap_form @ a))

    def _damp_frictional(self, b: np.ndarray, B: float, tau: float) -> np.ndarray:
        w0 = float(b @ b)
        if w0 == 0.0:
            return b
        alpha, q = self.p.alpha, self.p.q
        tol = self.cfg.substep_tol * w0
        w1 = w0
        for _ in range(self.cfg.max_substep_iters):
            wm = 0.5 * (w0 + w1)
            w_new = w0 - 2.0 * alpha * tau * (B + wm) ** q * wm
            if abs(w_new - w1) <= tol:
                w1 = w_new
                break
            w1 = w_new
        else:
            w1 = self._midpoint_root(w0, B, tau)
        if not w1 >= 0.0:
            raise SubstepDiverged(f"damping substep drove ||v||² negative ({w1}); reduce dt")
        return b * math.sqrt(w1 / w0)

    def _midpoint_root(self, w0: float, B: float, tau: float) -> float:
        # the midpoint residual is increasing in w1, so a root in [0, w0] is unique
        alpha, q = self.p.alpha, self.p.q

        def resid(w1):
            wm = 0.5 * (w0 + w1)
            return w1 - w0 + 2.0 * alpha * tau * (B + wm) ** q * wm

        if resid(0.0) > 0.0:
            raise SubstepDiverged("damping substep has no non-negative solution; reduce dt")
        return brentq(resid, 0.0, w0, xtol=self.cfg.substep_tol * w0, rtol=4 * np.finfo(float).eps)

    def _damp_strong(self, b: np.ndarray, B: float, tau: float) -> np.ndarray:
        y = self.T @ b
        if not np.any(y):
            return b
        alpha, q = self.p.alpha, self.p.q
        rate = alpha * tau * self.mu
        c = (B + float(y @ y)) ** q
        for _ in range(self.cfg.max_substep_iters):
            y1 = y * np.exp(-rate * c)
            ym = 0.5 * (y + y1)
            c_new = (B + float(ym @ ym)) ** q
            if abs(c_new - c) <= self.cfg.substep_tol * max(c, 1e-300):
                c = c_new
                break
            c = c_new
        else:
            raise SubstepDiverged(f"damping substep did not converge in {self.cfg.max_substep_iters} iterations")
        return self.T.T @ (y * np.exp(-rate * c))

    def advance(self, a: np.ndarray, b: np.ndarray, nsteps: int) -> tuple[np.ndarray, np.ndarray]:
        damp = None
        if self.p.alpha:
            damp = self._damp_frictional if self.p.variant == "frictional" else self._damp_strong
        cos, s_o, o_s, half = self.cos, self.sin_over_omega, self.omega_sin, self.half
        B = self.bilap_sq(a) if damp else 0.0
        for _ in range(nsteps):
            if damp:
                b = damp(b, B, half)
            a, b = cos * a + s_o * b, cos * b - o_s * a
            if damp:
                B = self.bilap_sq(a)
                b = damp(b, B, half)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NonFiniteState("modal_split produced non-finite values")
        return a, b


def _rk4_advance(u, v, ops: DiscreteOperators, p: ModelParams, dt: float, nsteps: int):
    f = dynamics.rhs_arrays
    for _ in range(nsteps):
        k1u, k1v = f(u, v, ops, p)
        k2u, k2v = f(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, ops, p)
        k3u, k3v = f(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, ops, p)
        k4u, k4v = f(u + dt * k3u, v + dt * k3v, ops, p)
        u = u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return u, v


def step(s: State, ops: DiscreteOperators, p: ModelParams, cfg: SchemeConfig | None = None) -> State:
    """Advance ``s`` by one time step of ``cfg.dt``."""
    cfg = cfg or SchemeConfig.from_params(p)
    if s.n != ops.n:
        raise ValueError(f"state has {s.n} nodes, operators have {ops.n}")
    if cfg.scheme == "rk4":
        u, v = _rk4_advance(s.u, s.v, ops, p, cfg.dt, 1)
        return State(u, v, s.t + cfg.dt)
    splitter = ModalSplitter(ops, p, cfg)
    a, b = splitter.advance(*splitter.to_modal(s), 1)
    return splitter.from_modal(a, b, s.t + cfg.dt)


def sample_steps(p: ModelParams) -> np.ndarray:
    """Step indices at which a run records samples (always includes 0 and the last step)."""
    n_steps = p.n_steps
    if p.samples_per_decade:
        decades = math.log10(max(n_steps, 1))
        count = max(2, int(math.ceil(decades * p.samples_per_decade)) + 1)
        logs = np.round(np.logspace(0.0, decades, count)).astype(np.int64)
        idx = np.concatenate(([0], logs, [n_steps]))
    else:
        idx = np.concatenate((np.arange(0, n_steps + 1, p.sample_every), [n_steps]))
    return np.unique(np.clip(idx, 0, n_steps))


def simulate(
    p: ModelParams,
    init: State,
    ops: DiscreteOperators | None = None,
    cfg: SchemeConfig | None = None,
    envelope_variant: str = "theorem",
) -> EnergyTrace:
    """Integrate from ``init`` to ``p.t_end`` and record an energy trace.

    Each sample carries the energy breakdown, the instantaneous dissipation
    and, for the frictional variant with ``alpha > 0``, the lower and upper
    envelope values (NaN otherwise).
    """
    if p.t_end < p.dt:
        raise EmptyRun(f"t_end={p.t_end} shorter than one step dt={p.dt}")
    validate_params(p)
    cfg = cfg or SchemeConfig.from_params(p)
    if ops is None:
        ops = assemble_operators(p.length, p.n, p.kappa)
    if init.n != ops.n or ops.n != p.n:
        raise ValueError(f"grid mismatch: params n={p.n}, operators n={ops.n}, state n={init.n}")

    e0 = dynamics.energy(init, ops, p.kappa, p.q).e_total
    ec = None
    if p.variant == "frictional" and p.alpha > 0 and e0 > 0:
        ec = envelope_constants(e0, p, ops, envelope_variant)

    def record(s: State) -> TraceSample:
        eb = dynamics.energy(s, ops, p.kappa, p.q)
        if ec is None:
            lo = hi = float("nan")
        else:
            lo, hi = lower_envelope(s.t, ec), upper_envelope(s.t, ec)
        return TraceSample(s.t, eb, dynamics.dissipation_rate(s, ops, p), lo, hi)

    steps = sample_steps(p)
    samples = [record(State(init.u, init.v, 0.0))]
    if cfg.scheme == "modal_split":
        splitter = ModalSplitter(ops, p, cfg)
        a, b = splitter.to_modal(init)
        for prev, nxt in zip(steps[:-1], steps[1:]):
            a, b = splitter.advance(a, b, int(nxt - prev))
            samples.append(record(splitter.from_modal(a, b, float(nxt) * cfg.dt)))
    else:
        u, v = np.array(init.u), np.array(init.v)
        for prev, nxt in zip(steps[:-1], steps[1:]):
            u, v = _rk4_advance(u, v, ops, p, cfg.dt, int(nxt - prev))
            samples.append(record(State(u, v, float(nxt) * cfg.dt)))

    trace = EnergyTrace(samples, p, samples[0].energy.e_total, ec)
    if p.variant == "frictional" and p.alpha > 0:
        rise = np.max(np.diff(trace.energies), initial=0.0)
        if rise > 1e-10:
            log.warning("sampled energy increased by %.3e; time step may be too large", rise)
    return trace
