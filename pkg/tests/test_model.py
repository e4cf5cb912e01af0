import json

import numpy as np
import pytest

from robkf import (
    DimensionMismatch,
    ModelError,
    ModelIOError,
    NotObservable,
    NotReachable,
    SingularDD,
    StateSpaceModel,
    Trajectory,
    V0NotSPD,
    load_model,
    normalize,
    observability_matrix,
    powers_matrix,
    reachability_matrix,
    simulate,
    validate,
)

from conftest import example_matrices


def test_example_model_dimensions(example_model):
    assert (example_model.n, example_model.p, example_model.m) == (2, 1, 3)


def test_validate_returns_model():
    A, B, C, D = example_matrices()
    m = validate(A, B, C, D, np.zeros(2), np.eye(2))
    assert isinstance(m, StateSpaceModel)
    np.testing.assert_array_equal(m.A, A)


def test_row_mismatch_rejected():
    A, _, C, D = example_matrices()
    with pytest.raises(DimensionMismatch):
        StateSpaceModel(A=A, B=np.zeros((3, 2)), C=C, D=D,
                        x0_mean=np.zeros(2), V0=np.eye(2))


def test_singular_dd_rejected():
    A, B, C, _ = example_matrices()
    with pytest.raises(SingularDD):
        StateSpaceModel(A=A, B=B, C=C, D=np.zeros((1, 3)),
                        x0_mean=np.zeros(2), V0=np.eye(2))


@pytest.mark.parametrize("V0", [
    np.array([[1.0, 2.0], [2.0, 1.0]]),   # indefinite
    np.array([[1.0, 0.5], [0.0, 1.0]]),   # asymmetric
    np.zeros((2, 2)),
])
def test_bad_v0_rejected(V0):
    A, B, C, D = example_matrices()
    with pytest.raises(V0NotSPD):
        StateSpaceModel(A=A, B=B, C=C, D=D, x0_mean=np.zeros(2), V0=V0)


def test_non_finite_rejected():
    A, B, C, D = example_matrices()
    A = A.copy()
    A[0, 0] = np.nan
    with pytest.raises(ModelError):
        StateSpaceModel(A=A, B=B, C=C, D=D, x0_mean=np.zeros(2), V0=np.eye(2))


def test_fields_are_read_only(example_model):
    with pytest.raises(ValueError):
        example_model.A[0, 0] = 7.0


def test_normalize_passthrough(example_model):
    nm = normalize(example_model)
    assert nm.normalized
    np.testing.assert_array_equal(nm.A, example_model.A)
    np.testing.assert_array_equal(nm.B, example_model.B)
    assert np.max(np.abs(nm.B @ nm.D.T)) == 0.0


def test_normalize_correlated_noise(make_model):
    rng = np.random.default_rng(101)
    model = make_model(rng, n=3, p=2, correlated=True)
    BDt = model.B @ model.D.T
    assert np.max(np.abs(BDt)) > 1e-6  # the case is non-trivial

    nm = normalize(model)
    assert np.max(np.abs(nm.B @ nm.D.T)) <= 1e-12
    DDt = model.D @ model.D.T
    proj = np.eye(model.m) - model.D.T @ np.linalg.solve(DDt, model.D)
    np.testing.assert_allclose(nm.B @ nm.B.T, model.B @ proj @ model.B.T, atol=1e-10)
    np.testing.assert_allclose(
        nm.A, model.A - BDt @ np.linalg.solve(DDt, model.C), atol=1e-12)
    np.testing.assert_allclose(nm.D @ nm.D.T, DDt, atol=1e-12)


def test_normalize_idempotent(make_model):
    rng = np.random.default_rng(77)
    model = make_model(rng, n=2, p=1, correlated=True)
    once = normalize(model)
    twice = normalize(once)
    np.testing.assert_allclose(twice.A, once.A, atol=1e-12)
    np.testing.assert_allclose(twice.B @ twice.B.T, once.B @ once.B.T, atol=1e-12)
    np.testing.assert_array_equal(twice.C, once.C)
    np.testing.assert_allclose(twice.D @ twice.D.T, once.D @ once.D.T, atol=1e-12)


def test_normalize_zero_b_not_reachable():
    A, _, C, D = example_matrices()
    model = StateSpaceModel(A=A, B=np.zeros((2, 3)), C=C, D=D,
                            x0_mean=np.zeros(2), V0=np.eye(2))
    with pytest.raises(NotReachable):
        normalize(model)


def test_normalize_unobservable():
    A, B, _, D = example_matrices()
    model = StateSpaceModel(A=A, B=B, C=np.zeros((1, 2)), D=D,
                            x0_mean=np.zeros(2), V0=np.eye(2))
    with pytest.raises(NotObservable):
        normalize(model)


def test_reachability_matrix_blocks(example_normalized):
    m = example_normalized
    np.testing.assert_array_equal(reachability_matrix(m, 1), m.B)
    R2 = reachability_matrix(m, 2)
    want = np.array([[1, 0, 0, 0.1, 1, 0], [0, 1, 0, 0, 1.2, 0]], dtype=float)
    np.testing.assert_allclose(R2, want, atol=1e-15)


def test_reachability_identity_A(example_normalized):
    m = example_normalized
    model = StateSpaceModel(A=np.eye(2), B=m.B, C=m.C, D=m.D,
                            x0_mean=np.zeros(2), V0=np.eye(2))
    np.testing.assert_array_equal(
        reachability_matrix(model, 2), np.hstack([m.B, m.B]))


def test_reachability_nesting(make_model):
    rng = np.random.default_rng(5)
    model = make_model(rng, n=3)
    R3 = reachability_matrix(model, 3)
    R4 = reachability_matrix(model, 4)
    np.testing.assert_array_equal(R4[:, : R3.shape[1]], R3)


def test_observability_matrix_values(example_normalized):
    m = example_normalized
    np.testing.assert_array_equal(observability_matrix(m, 1), m.C)
    O2 = observability_matrix(m, 2)
    np.testing.assert_allclose(O2, np.array([[0.1, -0.2], [1.0, -1.0]]), atol=1e-15)
    np.testing.assert_allclose(O2[-1], m.C[0])  # bottom block row is C


def test_observability_identity_A(example_normalized):
    m = example_normalized
    model = StateSpaceModel(A=np.eye(2), B=m.B, C=m.C, D=m.D,
                            x0_mean=np.zeros(2), V0=np.eye(2))
    O3 = observability_matrix(model, 3)
    for i in range(3):
        np.testing.assert_array_equal(O3[i : i + 1], m.C)


def test_powers_matrix(example_normalized):
    m = example_normalized
    np.testing.assert_array_equal(powers_matrix(m, 1), np.eye(2))
    O2R = powers_matrix(m, 2)
    np.testing.assert_array_equal(O2R[:2], m.A)
    np.testing.assert_array_equal(O2R[2:], np.eye(2))


def test_rank_matches_gramian(make_model):
    # rank(R_n) = n iff the n-step reachability Gramian is PD
    rng = np.random.default_rng(31)
    model = make_model(rng, n=3)
    R = reachability_matrix(model, 3)
    G = np.zeros((3, 3))
    Apow = np.eye(3)
    for _ in range(3):
        G += Apow @ model.B @ model.B.T @ Apow.T
        Apow = model.A @ Apow
    assert np.linalg.matrix_rank(R) == 3
    assert np.min(np.linalg.eigvalsh(G)) > 0


def test_simulate_deterministic(example_model):
    t1 = simulate(example_model, 50, seed=9)
    t2 = simulate(example_model, 50, seed=9)
    np.testing.assert_array_equal(t1.states, t2.states)
    np.testing.assert_array_equal(t1.observations, t2.observations)
    assert t1.seed == 9


def test_simulate_noiseless_state_propagation():
    # B = 0 kills process noise: x_k = A^k x_0 exactly for the drawn x_0
    A, _, C, D = example_matrices()
    model = StateSpaceModel(A=0.5 * A, B=np.zeros((2, 3)), C=C, D=D,
                            x0_mean=np.ones(2), V0=np.eye(2))
    traj = simulate(model, 10, seed=3)
    x = traj.states[0]
    for k in range(10):
        np.testing.assert_allclose(traj.states[k], x, atol=1e-12)
        x = model.A @ x


def test_simulate_noise_is_standard_normal():
    # C = 0, D = I, B = 0 makes y_k = v_k; check the sample covariance
    model = StateSpaceModel(A=np.zeros((1, 1)), B=np.zeros((1, 2)),
                            C=np.zeros((2, 1)), D=np.eye(2),
                            x0_mean=np.zeros(1), V0=np.eye(1))
    traj = simulate(model, 100_000, seed=12)
    cov = np.cov(traj.observations.T)
    np.testing.assert_allclose(cov, np.eye(2), atol=0.02)
    assert np.max(np.abs(np.mean(traj.observations, axis=0))) < 0.02


def test_simulate_zero_steps(example_model):
    traj = simulate(example_model, 0, seed=1)
    assert traj.states.shape == (0, 2)
    assert traj.observations.shape == (0, 1)


def test_trajectory_length_mismatch():
    with pytest.raises(DimensionMismatch):
        Trajectory(states=np.zeros((3, 2)), observations=np.zeros((2, 1)), seed=0)


def _write_model(tmp_path, payload):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(payload) if isinstance(payload, dict) else payload)
    return path


def _example_payload():
    A, B, C, D = example_matrices()
    return {"A": A.tolist(), "B": B.tolist(), "C": C.tolist(), "D": D.tolist(),
            "x0_mean": [0.0, 0.0], "V0": [[1.0, 0.0], [0.0, 1.0]]}


def test_load_model_roundtrip(tmp_path, example_model):
    path = _write_model(tmp_path, _example_payload())
    m = load_model(path)
    np.testing.assert_array_equal(m.A, example_model.A)
    np.testing.assert_array_equal(m.V0, example_model.V0)


def test_load_model_missing_file(tmp_path):
    path = tmp_path / "absent.json"
    with pytest.raises(ModelIOError, match="not readable"):
        load_model(path)


def test_load_model_rejects_nan(tmp_path):
    payload = _example_payload()
    text = json.dumps(payload).replace("0.1", "NaN")
    with pytest.raises(ModelIOError):
        load_model(_write_model(tmp_path, text))


def test_load_model_missing_and_extra_keys(tmp_path):
    payload = _example_payload()
    del payload["V0"]
    with pytest.raises(ModelIOError, match="V0"):
        load_model(_write_model(tmp_path, payload))
    payload = _example_payload()
    payload["junk"] = 1
    with pytest.raises(ModelIOError, match="junk"):
        load_model(_write_model(tmp_path, payload))


def test_load_model_not_an_object(tmp_path):
    with pytest.raises(ModelIOError):
        load_model(_write_model(tmp_path, "[1, 2, 3]"))
