import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btbeam.core import EnergyTrace, InitialCondition, ModelParams, State, make_initial, validate_params
from btbeam.errors import BadGrid, BadMode, BadTime, FileMismatch, NegativeCoefficient, NonFiniteState, QTooSmall
from btbeam.operators import assemble_operators


def test_defaults_validate():
    p = ModelParams()
    assert validate_params(p) is p
    assert p.scheme == "modal_split" and p.dt == 1e-2 and p.sample_every == 10


@pytest.mark.parametrize(
    "changes, err, field",
    [
        ({"q": 0.4}, QTooSmall, "q"),
        ({"alpha": -1.0}, NegativeCoefficient, "alpha"),
        ({"kappa": -0.1}, NegativeCoefficient, "kappa"),
        ({"n": 7}, BadGrid, "n"),
        ({"length": 0.0}, BadGrid, "length"),
        ({"dt": 0.0}, BadTime, "dt"),
        ({"t_end": 1e-3, "dt": 1e-2}, BadTime, "t_end"),
        ({"sample_every": 0}, BadTime, "sample_every"),
        ({"alpha": math.nan}, NegativeCoefficient, "alpha"),
        ({"dt": math.inf}, BadTime, "dt"),
    ],
)
def test_validation_errors_name_the_field(changes, err, field):
    with pytest.raises(err) as exc:
        validate_params(ModelParams().replace(**changes))
    assert exc.value.field == field


def test_low_q_override_warns():
    p = ModelParams(q=0.4, allow_low_q=True)
    with pytest.warns(RuntimeWarning):
        assert validate_params(p) is p


@settings(max_examples=60, deadline=None)
@given(
    kappa=st.floats(0, 10),
    alpha=st.floats(0, 10),
    q=st.floats(0.5, 4),
    n=st.integers(8, 256),
    dt=st.floats(1e-4, 1e-1),
)
def test_validate_is_idempotent(kappa, alpha, q, n, dt):
    p = ModelParams(kappa=kappa, alpha=alpha, q=q, n=n, dt=dt, t_end=1.0)
    assert validate_params(validate_params(p)) == p


def test_state_rejects_nonfinite_and_is_readonly():
    with pytest.raises(NonFiniteState):
        State(np.array([0.0, np.nan]), np.zeros(2))
    s = State(np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        s.u[0] = 1.0
    with pytest.raises(ValueError):
        State(np.zeros(3), np.zeros(4))


def test_sin_sq_zero_amplitude_and_midpoint():
    ops = assemble_operators(1.0, 63)
    assert not np.any(make_initial(InitialCondition("sin_sq_mode", 1, 0.0), ops).u)
    s = make_initial(InitialCondition("sin_sq_mode", 1, 1.0), ops)
    # node 32 of 63 sits at x = 1/2
    assert s.u[31] == pytest.approx(1.0, abs=1e-15)
    assert not np.any(s.v)


def test_eigenmode_normalised_and_matches_dense_eigenvector():
    ops = assemble_operators(1.0, 40)
    s = make_initial(InitialCondition("eigenmode", 2, 1.0), ops)
    assert ops.h * s.u @ ops.bilap @ s.u == pytest.approx(1.0, rel=1e-12)
    _, vecs = np.linalg.eigh(ops.bilap)
    ref = vecs[:, 1]
    cos = abs(ref @ s.u) / (np.linalg.norm(ref) * np.linalg.norm(s.u))
    assert cos == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("k", [0, 17])
def test_bad_mode(k):
    with pytest.raises(BadMode):
        make_initial(InitialCondition("sin_sq_mode", k, 1.0), assemble_operators(1.0, 64))


@settings(max_examples=30, deadline=None)
@given(amp=st.floats(1e-6, 10).filter(lambda a: a != 0), k=st.integers(1, 16))
def test_nonzero_amplitude_gives_nonzero_state(amp, k):
    s = make_initial(InitialCondition("sin_sq_mode", k, amp), assemble_operators(1.0, 64))
    assert np.linalg.norm(s.u) > 0


def test_from_file_roundtrip(tmp_path):
    ops = assemble_operators(1.0, 16)
    u = np.linspace(0, 1, 16)
    v = np.cos(u)
    np.save(tmp_path / "uv.npy", np.vstack([u, v]))
    s = make_initial(InitialCondition("from_file", path=str(tmp_path / "uv.npy")), ops)
    np.testing.assert_array_equal(s.u, u)
    np.testing.assert_array_equal(s.v, v)
    np.savetxt(tmp_path / "u.txt", u)
    s = make_initial(InitialCondition("from_file", path=str(tmp_path / "u.txt")), ops)
    np.testing.assert_allclose(s.u, u, rtol=1e-15)
    assert not np.any(s.v)


def test_from_file_mismatch(tmp_path):
    np.save(tmp_path / "u.npy", np.zeros(10))
    ops = assemble_operators(1.0, 16)
    with pytest.raises(FileMismatch):
        make_initial(InitialCondition("from_file", path=str(tmp_path / "u.npy")), ops)
    with pytest.raises(FileMismatch):
        make_initial(InitialCondition("from_file", path=str(tmp_path / "missing.npy")), ops)


def test_trace_invariants():
    tr = EnergyTrace.from_energies([0.0, 1.0, 2.0], [1.0, 0.5, 0.25])
    assert tr.e0 == 1.0
    np.testing.assert_array_equal(tr.times, [0, 1, 2])
    with pytest.raises(ValueError):
        EnergyTrace.from_energies([0.0, 1.0, 1.0], [1.0, 0.5, 0.25])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert len(EnergyTrace.from_energies([], [])) == 0
