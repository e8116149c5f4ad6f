"""Post-processing of energy traces.

Decay-law fitting is exposed both as plain functions over traces and as a
scikit-learn compatible regressor (:class:`DecayRegressor`) so fitted decay
laws can be dropped into pipelines, grid searches and cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import EnergyTrace, InitialCondition, ModelParams, make_initial
from .envelope import EnvelopeConstants, lower_envelope, upper_envelope
from .errors import InsufficientGrids, NonPositiveEnergy, ParamMismatch, TooFewSamples

DecayModel = Literal["power", "exponential"]


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    model: DecayModel = "power"
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "exponent": self.exponent,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "t_lo": self.window[0],
            "t_hi": self.window[1],
            "n_samples": self.n_samples,
        }


def _as_times(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, 1) if X.ndim == 1 else X


class DecayRegressor(RegressorMixin, BaseEstimator):
    """Least-squares decay law ``E = C t^p`` (power) or ``E = C e^(p t)`` (exponential).

    The fit is linear in log-energy. ``exponent_`` holds ``p`` (negative for
    decay), ``intercept_`` holds ``log C``. :meth:`score` returns the
    coefficient of determination of the log-linear fit.

    Parameters
    ----------
    model : {"power", "exponential"}
        Decay family.
    """

    def __init__(self, model: DecayModel = "power"):
        self.model = model

    def _design(self, t: np.ndarray) -> np.ndarray:
        if self.model == "power":
            if np.any(t <= 0):
                raise ValueError("power-law fits need strictly positive times")
            return np.log(t)
        if self.model == "exponential":
            return t
        raise ValueError(f"unknown model {self.model!r}")

    def fit(self, X, y):
        X, y = check_X_y(_as_times(X), y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single time column, got {X.shape[1]}")
        if np.any(y <= 0):
            raise NonPositiveEnergy("energies must be strictly positive to fit a decay law")
        x = self._design(X[:, 0])
        ly = np.log(y)
        A = np.column_stack((x, np.ones_like(x)))
        (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
        self.exponent_ = float(slope)
        self.intercept_ = float(icpt)
        self.r_squared_ = _r_squared(ly, slope * x + icpt)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        X = check_array(_as_times(X))
        return np.exp(self.exponent_ * self._design(X[:, 0]) + self.intercept_)

    def score(self, X, y, sample_weight=None):
        check_is_fitted(self, "exponent_")
        X, y = check_X_y(_as_times(X), y, y_numeric=True)
        return _r_squared(np.log(y), np.log(self.predict(X)))


def _r_squared(y: np.ndarray, fit: np.ndarray) -> float:
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return max(0.0, 1.0 - ss_res / ss_tot)


def tail_window(times: np.ndarray, tail_fraction: float) -> np.ndarray:
    """Mask of samples in the last ``tail_fraction`` of the positive log-time span."""
    if not 0 < tail_fraction < 1:
        raise ValueError(f"tail_fraction must lie in (0, 1), got {tail_fraction}")
    pos = times > 0
    if not np.any(pos):
        return pos
    lo, hi = math.log(times[pos].min()), math.log(times[pos].max())
    t_lo = math.exp(hi - tail_fraction * (hi - lo))
    return pos & (times >= t_lo * (1 - 1e-12))


def fit_decay(
    trace: EnergyTrace, model: DecayModel = "power", tail_fraction: float = 0.5, min_samples: int = 50
) -> FitResult:
    t, e = trace.times, trace.energies
    mask = tail_window(t, tail_fraction)
    if mask.sum() < min_samples:
        raise TooFewSamples(f"{mask.sum()} samples in the tail window, need {min_samples}")
    if np.any(e[mask] <= 0):
        raise NonPositiveEnergy("tail energies must be strictly positive")
    reg = DecayRegressor(model).fit(t[mask], e[mask])
    return FitResult(
        exponent=reg.exponent_,
        intercept=reg.intercept_,
        r_squared=reg.r_squared_,
        window=(float(t[mask].min()), float(t[mask].max())),
        model=model,
        n_samples=int(mask.sum()),
    )


def fit_power_exponent(trace: EnergyTrace, tail_fraction: float = 0.5, min_samples: int = 50) -> FitResult:
    """Slope of ``log E`` against ``log t`` over the tail of the trace."""
    return fit_decay(trace, "power", tail_fraction, min_samples)


@dataclass(frozen=True)
class DecayRates:
    times: np.ndarray
    rates: np.ndarray

    def at(self, t: float) -> float:
        """Rate at ``t``, linearly interpolated between interior samples."""
        return float(np.interp(t, self.times, self.rates))

    def __iter__(self):
        return iter(zip(self.times, self.rates))


def local_decay_rate(trace: EnergyTrace) -> DecayRates:
    """Centred differences of ``-d log E / dt`` at interior samples."""
    t, e = trace.times, trace.energies
    if len(t) < 3:
        raise TooFewSamples("need at least 3 samples")
    if np.any(e <= 0):
        raise NonPositiveEnergy("energies must be strictly positive")
    le = np.log(e)
    rates = -(le[2:] - le[:-2]) / (t[2:] - t[:-2])
    return DecayRates(t[1:-1], rates)


@dataclass(frozen=True)
class NonExponentialReport:
    rate_end: float
    rate_tenth: float
    rate_ratio: float
    r_squared: float
    passed: bool


def non_exponential_verdict(
    trace: EnergyTrace, max_rate_ratio: float = 0.5, min_r_squared: float = 0.995, tail_fraction: float = 0.5
) -> NonExponentialReport:
    """Vanishing log-decay rate plus a good power-law fit on the tail."""
    rates = local_decay_rate(trace)
    t_end = rates.times[-1]
    r_end = rates.rates[-1]
    r_tenth = rates.at(t_end / 10.0)
    fit = fit_power_exponent(trace, tail_fraction)
    ratio = r_end / r_tenth if r_tenth > 0 else math.inf
    return NonExponentialReport(
        rate_end=float(r_end),
        rate_tenth=float(r_tenth),
        rate_ratio=float(ratio),
        r_squared=fit.r_squared,
        passed=bool(ratio <= max_rate_ratio and fit.r_squared >= min_r_squared),
    )


@dataclass
class ContainmentReport:
    passed: bool
    min_margin_lo: float
    min_margin_hi: float
    tol_lo: float
    tol_hi: float
    violations: list[tuple[int, float, str]] = field(default_factory=list)


def containment_report(
    trace: EnergyTrace, ec: EnvelopeConstants, tol_lo: float = 0.01, tol_hi: float = 0.01
) -> ContainmentReport:
    """Per-sample margins ``E/lower - 1`` and ``upper/E - 1``.

    Samples with zero energy have infinite lower margin; the check passes when
    no margin falls below its negative tolerance.
    """
    p = trace.params_snapshot
    for name in ("alpha", "q", "kappa"):
        if not math.isclose(getattr(p, name), getattr(ec, name), rel_tol=1e-12, abs_tol=1e-15):
            raise ParamMismatch(f"{name}: trace has {getattr(p, name)}, constants have {getattr(ec, name)}")
    if not math.isclose(trace.e0, ec.e0, rel_tol=1e-12):
        raise ParamMismatch(f"e0: trace has {trace.e0}, constants have {ec.e0}")
    t, e = trace.times, trace.energies
    lo = lower_envelope(t, ec)
    hi = upper_envelope(t, ec)
    with np.errstate(divide="ignore"):
        m_lo = np.where(e > 0, e / lo - 1.0, np.inf)
        m_hi = np.where(e > 0, hi / e - 1.0, np.inf)
    violations = [(int(i), float(t[i]), "lower") for i in np.flatnonzero(m_lo < -tol_lo)]
    violations += [(int(i), float(t[i]), "upper") for i in np.flatnonzero(m_hi < -tol_hi)]
    violations.sort()
    return ContainmentReport(
        passed=not violations,
        min_margin_lo=float(m_lo.min()) if len(m_lo) else math.inf,
        min_margin_hi=float(m_hi.min()) if len(m_hi) else math.inf,
        tol_lo=tol_lo,
        tol_hi=tol_hi,
        violations=violations,
    )


def observed_orders(h: Sequence[float], values: Sequence[float], exact: float | None = None) -> list[float]:
    """Observed convergence orders.

    With ``exact`` given, pairwise orders ``log(e_i/e_i+1) / log(h_i/h_i+1)``
    of the errors. Otherwise Richardson orders from consecutive triples,
    solving ``(f1-f2)/(f2-f3) = (h1^p - h2^p)/(h2^p - h3^p)`` for ``p``.
    """
    h = np.asarray(h, dtype=float)
    f = np.asarray(values, dtype=float)
    if exact is not None:
        err = np.abs(f - exact)
        return [float(math.log(err[i] / err[i + 1]) / math.log(h[i] / h[i + 1])) for i in range(len(h) - 1)]
    orders = []
    for i in range(len(h) - 2):
        d1, d2 = f[i] - f[i + 1], f[i + 1] - f[i + 2]
        if d2 == 0 or d1 / d2 <= 0:
            orders.append(float("nan"))
            continue
        target = d1 / d2
        h1, h2, h3 = h[i : i + 3]

        def g(p):
            return (h1**p - h2**p) / (h2**p - h3**p) - target

        try:
            orders.append(float(brentq(g, 0.05, 20.0)))
        except ValueError:
            orders.append(float(math.log(abs(target)) / math.log(h1 / h2)))
    return orders


@dataclass
class ConvergenceReport:
    grids: list[int]
    h: list[float]
    energies: list[float]
    energy_orders: list[float]
    lambda1: list[float]
    lambda1_reference: float
    lambda1_orders: list[float]


def convergence_study(
    p: ModelParams, init_kind: InitialCondition, grids: Sequence[int]
) -> ConvergenceReport:
    """Grid-refinement study of ``E(t_end)`` and of Λ₁.

    Energy orders are Richardson estimates over consecutive grid triples;
    Λ₁ orders are measured against the continuum clamped-beam eigenvalue.
    """
    from .integrate import simulate
    from .operators import assemble_operators, biharmonic_min_eigenvalue, continuum_min_eigenvalue

    grids = [int(g) for g in grids]
    if len(set(grids)) < 3 or len(set(grids)) != len(grids):
        raise InsufficientGrids(f"need at least 3 distinct grids, got {grids}")
    if any(b <= a for a, b in zip(grids, grids[1:])):
        raise InsufficientGrids(f"grids must be strictly increasing, got {grids}")
    ratios = [(b + 1) / (a + 1) for a, b in zip(grids, grids[1:])]
    if min(ratios) < 1.2 or max(ratios) > 1.1 * min(ratios):
        raise InsufficientGrids(f"grids are not geometrically refined (ratios {ratios})")

    hs, energies, lambdas = [], [], []
    for n in grids:
        pn = p.replace(n=n)
        ops = assemble_operators(pn.length, n, pn.kappa)
        init = make_initial(init_kind, ops)
        trace = simulate(pn, init, ops)
        hs.append(ops.h)
        energies.append(float(trace.energies[-1]))
        lambdas.append(biharmonic_min_eigenvalue(ops))
    ref = continuum_min_eigenvalue(p.length)
    return ConvergenceReport(
        grids=grids,
        h=hs,
        energies=energies,
        energy_orders=observed_orders(hs, energies),
        lambda1=lambdas,
        lambda1_reference=ref,
        lambda1_orders=observed_orders(hs, lambdas, exact=ref),
    )
