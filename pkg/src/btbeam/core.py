"""Domain types shared by every module: parameters, states, energy records.

The beam lives on the interval ``(0, length)`` discretised by ``n`` interior
nodes. Displacement and velocity are stored only at interior nodes; the
clamped boundary values are implicit (zero value, zero slope).
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .errors import (
    BadGrid,
    BadMode,
    BadTime,
    FileMismatch,
    NegativeCoefficient,
    NonFiniteState,
    QTooSmall,
)

Variant = Literal["frictional", "strong"]
Scheme = Literal["rk4", "modal_split"]

VARIANTS = ("frictional", "strong")
SCHEMES = ("rk4", "modal_split")
Q_MIN = 0.5


@dataclass(frozen=True)
class ModelParams:
    """Physical and run parameters.

    ``samples_per_decade`` switches the sampler from every ``sample_every``
    steps to a logarithmically spaced schedule, which long runs need to keep
    traces small.
    """

    kappa: float = 0.0
    alpha: float = 1.0
    q: float = 1.0
    variant: Variant = "frictional"
    length: float = 1.0
    n: int = 64
    dt: float = 1e-2
    t_end: float = 10.0
    sample_every: int = 10
    scheme: Scheme = "modal_split"
    seed: int = 0
    allow_low_q: bool = False
    samples_per_decade: int | None = None

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FINITE_FIELDS = {
    "kappa": NegativeCoefficient,
    "alpha": NegativeCoefficient,
    "q": QTooSmall,
    "length": BadGrid,
    "dt": BadTime,
    "t_end": BadTime,
}


def validate_params(p: ModelParams) -> ModelParams:
    """Return ``p`` unchanged if every invariant holds, else raise.

    Raises a :class:`~btbeam.errors.ValidationError` subclass whose ``field``
    attribute names the violated parameter.
    """
    for name, err in _FINITE_FIELDS.items():
        value = getattr(p, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise err(name, f"must be a finite number, got {value!r}")
    if p.kappa < 0:
        raise NegativeCoefficient("kappa", f"must be >= 0, got {p.kappa}")
    if p.alpha < 0:
        raise NegativeCoefficient("alpha", f"must be >= 0, got {p.alpha}")
    if p.q <= 0:
        raise QTooSmall("q", f"must be > 0, got {p.q}")
    if p.q < Q_MIN:
        if not p.allow_low_q:
            raise QTooSmall("q", f"must be >= {Q_MIN} (set allow_low_q to override), got {p.q}")
        warnings.warn(
            f"q={p.q} < {Q_MIN}: outside the well-posedness regime, exploratory run",
            RuntimeWarning,
            stacklevel=2,
        )
    if p.variant not in VARIANTS:
        raise NegativeCoefficient("variant", f"must be one of {VARIANTS}, got {p.variant!r}")
    if p.scheme not in SCHEMES:
        raise BadTime("scheme", f"must be one of {SCHEMES}, got {p.scheme!r}")
    if p.length <= 0:
        raise BadGrid("length", f"must be > 0, got {p.length}")
    if not isinstance(p.n, (int, np.integer)) or p.n < 8:
        raise BadGrid("n", f"need at least 8 interior nodes, got {p.n}")
    if p.dt <= 0:
        raise BadTime("dt", f"must be > 0, got {p.dt}")
    if p.t_end < p.dt:
        raise BadTime("t_end", f"must be >= dt ({p.dt}), got {p.t_end}")
    if not isinstance(p.sample_every, (int, np.integer)) or p.sample_every < 1:
        raise BadTime("sample_every", f"must be an integer >= 1, got {p.sample_every}")
    if p.samples_per_decade is not None and p.samples_per_decade < 1:
        raise BadTime("samples_per_decade", f"must be >= 1, got {p.samples_per_decade}")
    return p


@dataclass(frozen=True)
class State:
    """Displacement ``u`` and velocity ``v`` at interior nodes, at time ``t``."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.ndim != 1 or u.shape != v.shape:
            raise ValueError(f"u and v must be 1-D of equal length, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NonFiniteState(f"non-finite entries in state at t={self.t}")
        if self.t < 0:
            raise ValueError(f"t must be >= 0, got {self.t}")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @classmethod
    def zeros(cls, n: int, t: float = 0.0) -> "State":
        return cls(np.zeros(n), np.zeros(n), t)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy and its parts. ``e_total`` carries the factor one half."""

    e_total: float
    bilap_sq: float
    vel_sq: float
    grad_sq: float
    coeff: float

    @property
    def phase_norm_sq(self) -> float:
        """Squared phase-space norm ``||Δu||² + ||v||²``."""
        return self.bilap_sq + self.vel_sq


@dataclass(frozen=True)
class TraceSample:
    t: float
    energy: EnergyBreakdown
    dissipation: float
    lower_env: float
    upper_env: float


@dataclass
class EnergyTrace:
    samples: list[TraceSample]
    params_snapshot: ModelParams
    e0: float
    constants: object | None = None  # EnvelopeConstants when envelopes are defined

    def __post_init__(self):
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing")
        if self.samples and self.e0 != self.samples[0].energy.e_total:
            raise ValueError("e0 must equal the first sample's e_total")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy.e_total for s in self.samples])

    def column(self, name: str) -> np.ndarray:
        if name in ("t", "dissipation", "lower_env", "upper_env"):
            return np.array([getattr(s, name) for s in self.samples])
        return np.array([getattr(s.energy, name) for s in self.samples])

    @classmethod
    def from_energies(
        cls,
        times: Sequence[float],
        energies: Sequence[float],
        params: ModelParams | None = None,
        lower: Sequence[float] | None = None,
        upper: Sequence[float] | None = None,
    ) -> "EnergyTrace":
        """Build a trace carrying only total energies (other fields are NaN).

        Useful for analysing energy curves that did not come from a simulation.
        """
        times = np.asarray(times, dtype=float)
        energies = np.asarray(energies, dtype=float)
        nan = float("nan")
        lower = np.full(times.shape, nan) if lower is None else np.asarray(lower, dtype=float)
        upper = np.full(times.shape, nan) if upper is None else np.asarray(upper, dtype=float)
        samples = [
            TraceSample(
                t=float(t),
                energy=EnergyBreakdown(float(e), nan, nan, nan, nan),
                dissipation=nan,
                lower_env=float(lo),
                upper_env=float(hi),
            )
            for t, e, lo, hi in zip(times, energies, lower, upper)
        ]
        e0 = float(energies[0]) if len(energies) else 0.0
        return cls(samples, params if params is not None else ModelParams(), e0)


@dataclass(frozen=True)
class InitialCondition:
    """Descriptor for initial data; see :func:`make_initial`."""

    kind: Literal["sin_sq_mode", "eigenmode", "from_file"] = "sin_sq_mode"
    k: int = 1
    amp: float = 0.1
    path: str | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "from_file":
            d["path"] = self.path
        else:
            d["k"] = self.k
            d["amp"] = self.amp
        return d


def node_positions(length: float, n: int) -> np.ndarray:
    h = length / (n + 1)
    return h * np.arange(1, n + 1)


def make_initial(init: InitialCondition, ops) -> State:
    """Construct clamped-compatible initial data on the grid of ``ops``.

    ``sin_sq_mode`` gives ``u = amp * sin²(kπx/L)`` with zero velocity.
    ``eigenmode`` gives the k-th eigenvector of the discrete bilaplacian,
    scaled so that ``||Δu|| = amp``. ``from_file`` reads ``.npy`` or text
    holding ``u`` (one row/column) or ``u`` and ``v`` (two).
    """
    n, length = ops.n, ops.length
    if init.kind == "from_file":
        return _load_state(init.path, n)
    if init.k < 1 or init.k > n // 4:
        raise BadMode(f"mode k={init.k} outside resolvable range 1..{n // 4} for n={n}")
    if not math.isfinite(init.amp):
        raise ValueError(f"amp must be finite, got {init.amp}")
    if init.kind == "sin_sq_mode":
        x = node_positions(length, n)
        u = init.amp * np.sin(init.k * np.pi * x / length) ** 2
        return State(u, np.zeros(n))
    if init.kind == "eigenmode":
        from .operators import bilap_eigendecomposition

        _, vecs = bilap_eigendecomposition(ops)
        phi = vecs[:, init.k - 1].copy()
        if phi[np.argmax(np.abs(phi))] < 0:
            phi = -phi
        norm = math.sqrt(ops.h * phi @ (ops.bilap @ phi))
        return State(init.amp * phi / norm, np.zeros(n))
    raise ValueError(f"unknown initial-condition kind {init.kind!r}")


def _load_state(path: str | None, n: int) -> State:
    if path is None:
        raise FileMismatch("from_file initial condition needs a path")
    p = Path(path)
    if not p.exists():
        raise FileMismatch(f"initial-condition file not found: {p}")
    data = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, delimiter="," if p.suffix == ".csv" else None)
    data = np.atleast_1d(np.asarray(data, dtype=float))
    if data.ndim == 1:
        u, v = data, np.zeros_like(data)
    elif data.ndim == 2 and 2 in data.shape:
        if data.shape[0] == 2 and data.shape[1] != 2:
            u, v = data
        else:
            u, v = data[:, 0], data[:, 1]
    else:
        raise FileMismatch(f"cannot interpret array of shape {data.shape} as (u[, v])")
    if u.shape[0] != n:
        raise FileMismatch(f"file holds {u.shape[0]} nodes, grid has {n}")
    return State(u, v)
