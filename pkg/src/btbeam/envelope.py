"""Two-sided polynomial envelopes for the energy of the frictional model.

For initial energy ``E0 > 0`` and damping ``alpha > 0`` the energy obeys

    [c alpha q t + E0^-q]^(-1/q)  <=  E(t)  <=  [q/J(E0) (t-1)+ + E0^-q]^(-1/q)

with ``c = 2^(q+1)``. ``J`` is built from the embedding constant ``d``
(``||u|| <= d ||Δu||``) through the auxiliary function ``K``:

    K(s) = (64 d² + 1) / alpha^(1/(q+1)) + 2^(q+1) d² alpha^((2q+1)/(q+1)) s^(2q)
    J(s) = (4/3)^(q+1) [(2s)^(q/(q+1)) + 2 K(s)]^(q+1)

The upper bound follows from the unit-window difference inequality
``sup_[t,t+1] E^(q+1) <= J(E0) (E(t) - E(t+1))``, which
:func:`verify_nakao_hypothesis` checks on sampled traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import EnergyTrace, ModelParams
from .errors import EmptySequence, TooShort, TooSparse, ZeroDamping
from .operators import DiscreteOperators, embedding_constant, gradient_embedding_constant

LowerVariant = Literal["theorem", "remark"]


def k_function(s, alpha: float, q: float, d: float):
    return (64.0 * d**2 + 1.0) / alpha ** (1.0 / (q + 1.0)) + 2.0 ** (q + 1.0) * d**2 * alpha ** (
        (2.0 * q + 1.0) / (q + 1.0)
    ) * np.power(s, 2.0 * q)


def j_function(s, alpha: float, q: float, d: float):
    k = k_function(s, alpha, q, d)
    return (4.0 / 3.0) ** (q + 1.0) * (np.power(2.0 * s, q / (q + 1.0)) + 2.0 * k) ** (q + 1.0)


def lower_coefficient(q: float, variant: LowerVariant) -> float:
    if variant == "theorem":
        return 2.0 ** (q + 1.0)
    if variant == "remark":
        return 2.0 ** (2.0 * q + 1.0)
    raise ValueError(f"unknown lower-envelope variant {variant!r}")


@dataclass(frozen=True)
class EnvelopeConstants:
    e0: float
    alpha: float
    q: float
    kappa: float
    d: float
    c_prime: float
    k_of_e0: float
    j_of_e0: float
    lower_coeff_variant: LowerVariant = "theorem"

    @classmethod
    def build(
        cls,
        e0: float,
        alpha: float,
        q: float,
        kappa: float = 0.0,
        d: float = 0.0,
        c_prime: float = 0.0,
        variant: LowerVariant = "theorem",
    ) -> "EnvelopeConstants":
        if alpha <= 0:
            raise ZeroDamping("envelopes need alpha > 0")
        if not e0 > 0:
            raise ValueError(f"initial energy must be positive, got {e0}")
        lower_coefficient(q, variant)
        return cls(
            e0=float(e0),
            alpha=float(alpha),
            q=float(q),
            kappa=float(kappa),
            d=float(d),
            c_prime=float(c_prime),
            k_of_e0=float(k_function(e0, alpha, q, d)),
            j_of_e0=float(j_function(e0, alpha, q, d)),
            lower_coeff_variant=variant,
        )

    @property
    def lower_coeff(self) -> float:
        return lower_coefficient(self.q, self.lower_coeff_variant)

    def with_variant(self, variant: LowerVariant) -> "EnvelopeConstants":
        return EnvelopeConstants.build(self.e0, self.alpha, self.q, self.kappa, self.d, self.c_prime, variant)

    def to_dict(self) -> dict:
        return {
            "e0": self.e0,
            "alpha": self.alpha,
            "q": self.q,
            "kappa": self.kappa,
            "d": self.d,
            "c_prime": self.c_prime,
            "K": self.k_of_e0,
            "J": self.j_of_e0,
            "lower_coeff_variant": self.lower_coeff_variant,
            "lower_coeff": self.lower_coeff,
        }


def envelope_constants(
    e0: float, p: ModelParams, ops: DiscreteOperators, variant: LowerVariant = "theorem"
) -> EnvelopeConstants:
    """Envelope constants for a run, using the embedding constants of ``ops``."""
    if p.alpha <= 0:
        raise ZeroDamping("envelopes are only defined for alpha > 0")
    return EnvelopeConstants.build(
        e0,
        p.alpha,
        p.q,
        p.kappa,
        d=embedding_constant(ops),
        c_prime=gradient_embedding_constant(ops),
        variant=variant,
    )


def _scalar_or_array(t, out):
    return float(out) if np.ndim(t) == 0 else out


def lower_envelope(t, ec: EnvelopeConstants):
    t = np.asarray(t, dtype=float)
    out = (ec.lower_coeff * ec.alpha * ec.q * t + ec.e0 ** -ec.q) ** (-1.0 / ec.q)
    out = np.where(t == 0.0, ec.e0, out)
    return _scalar_or_array(t, out)


def upper_envelope(t, ec: EnvelopeConstants):
    t = np.asarray(t, dtype=float)
    out = (ec.q / ec.j_of_e0 * np.maximum(t - 1.0, 0.0) + ec.e0 ** -ec.q) ** (-1.0 / ec.q)
    out = np.where(t <= 1.0, ec.e0, np.minimum(out, ec.e0))
    return _scalar_or_array(t, out)


@dataclass(frozen=True)
class NakaoInput:
    """Non-increasing sequence ``phi`` on unit windows with difference constant ``c0``."""

    phi: np.ndarray
    c0: float
    q: float

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.size == 0:
            raise EmptySequence("phi is empty")
        if np.any(phi < 0):
            raise ValueError("phi must be non-negative")
        if np.any(np.diff(phi) > 0):
            raise ValueError("phi must be non-increasing")
        if not self.c0 > 0 or not self.q > 0:
            raise ValueError("c0 and q must be positive")
        object.__setattr__(self, "phi", phi)


def nakao_bound(inp: NakaoInput, t):
    """``[q/c0 (t-1)+ + phi(0)^-q]^(-1/q)``."""
    t = np.asarray(t, dtype=float)
    phi0 = inp.phi[0]
    if phi0 == 0:
        return _scalar_or_array(t, np.zeros_like(t))
    out = (inp.q / inp.c0 * np.maximum(t - 1.0, 0.0) + phi0 ** -inp.q) ** (-1.0 / inp.q)
    out = np.where(t <= 1.0, phi0, np.minimum(out, phi0))
    return _scalar_or_array(t, out)


def sequence_window_ratios(inp: NakaoInput) -> np.ndarray:
    """Per-index ratio ``max(phi_n, phi_n+1)^(q+1) / (c0 (phi_n - phi_n+1))``.

    Values above one mark indices where the difference inequality fails.
    """
    phi = inp.phi
    sup = np.maximum(phi[:-1], phi[1:]) ** (inp.q + 1)
    diff = phi[:-1] - phi[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diff > 0, sup / (inp.c0 * diff), np.where(sup > 0, np.inf, 0.0))
    return ratio


@dataclass
class NakaoWindow:
    t: float
    sup_pow: float
    diff: float
    ratio: float
    degenerate: bool


@dataclass
class NakaoReport:
    passed: bool
    worst_ratio: float
    tol: float
    windows: list[NakaoWindow] = field(default_factory=list)

    @property
    def degenerate_windows(self) -> list[NakaoWindow]:
        return [w for w in self.windows if w.degenerate]


def verify_nakao_hypothesis(
    trace: EnergyTrace,
    ec: EnvelopeConstants,
    tol: float = 0.05,
    t_start: float | None = None,
    min_samples_per_unit: int = 10,
) -> NakaoReport:
    """Check ``sup_[t,t+1] E^(q+1) <= J(E0) (E(t) - E(t+1))`` on unit windows.

    Windows start at ``t_start`` (default: first sample time) and advance by
    one. The window sup is the maximum over samples inside the window. A
    window where the energy does not drop is degenerate; it is consistent only
    if the energy there is zero, otherwise its ratio is infinite.
    """
    t = trace.times
    e = trace.energies
    if len(t) < 2 or t[-1] - t[0] < 2.0:
        raise TooShort("trace must span at least two time units")
    t0 = t[0] if t_start is None else float(t_start)
    span = t[-1] - t0
    n_windows = int(math.floor(span + 1e-9))
    if n_windows < 1:
        raise TooShort("no complete unit window after t_start")

    q, j = ec.q, ec.j_of_e0
    slack = 1e-9 * max(1.0, abs(t[-1]))
    windows = []
    for k in range(n_windows):
        a, b = t0 + k, t0 + k + 1
        ia = _nearest(t, a)
        ib = _nearest(t, b)
        if abs(t[ia] - a) > 0.5 / min_samples_per_unit + slack or abs(t[ib] - b) > 0.5 / min_samples_per_unit + slack:
            raise TooSparse(f"no sample close to window edges [{a}, {b}]")
        if ib - ia < min_samples_per_unit:
            raise TooSparse(f"window [{a}, {b}] holds {ib - ia + 1} samples, need {min_samples_per_unit + 1}")
        sup_pow = float(np.max(e[ia : ib + 1]) ** (q + 1))
        diff = float(e[ia] - e[ib])
        if diff > 0:
            windows.append(NakaoWindow(a, sup_pow, diff, sup_pow / (j * diff), False))
        else:
            windows.append(NakaoWindow(a, sup_pow, diff, 0.0 if sup_pow == 0 else math.inf, True))
    worst = max(w.ratio for w in windows)
    return NakaoReport(passed=worst <= 1.0 + tol, worst_ratio=worst, tol=tol, windows=windows)


def _nearest(t: np.ndarray, x: float) -> int:
    i = int(np.searchsorted(t, x))
    if i == 0:
        return 0
    if i == len(t):
        return len(t) - 1
    return i if t[i] - x < x - t[i - 1] else i - 1
