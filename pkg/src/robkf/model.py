"""State-space models, structural checks, noise normalization, simulation.

The model convention is a single white noise vector driving both the
state and the measurement::

    x_{k+1} = A x_k + B v_k
    y_k     = C x_k + D v_k,     v_k ~ N(0, I_m)

Most of the filtering theory additionally wants B Dᵀ = 0 (process and
measurement noise uncorrelated); ``normalize`` rewrites any model into
that form without changing its input-output statistics.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from robkf import _linalg
from robkf.errors import (
    DimensionMismatch,
    ModelError,
    ModelIOError,
    NotObservable,
    NotReachable,
    SingularDD,
    V0NotSPD,
)

__all__ = [
    "StateSpaceModel",
    "NormalizedModel",
    "Trajectory",
    "validate",
    "normalize",
    "reachability_matrix",
    "observability_matrix",
    "powers_matrix",
    "simulate",
    "load_model",
]

log = logging.getLogger(__name__)

# B Dᵀ entries at or below this are treated as structurally zero.
CROSS_COV_TOL = 1e-12
# Relative singular-value threshold for rank decisions.
RANK_REL_TOL = 1e-10

_FIELDS = ("A", "B", "C", "D", "x0_mean", "V0")


def _ingest(name: str, value, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"{name} is not a rectangular numeric array") from exc
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class StateSpaceModel:
    """Validated time-invariant model.

    Parameters
    ----------
    A, B, C, D : array_like
        System matrices with shapes (n, n), (n, m), (p, n), (p, m).
    x0_mean : array_like
        Mean of the initial state, shape (n,).
    V0 : array_like
        SPD covariance of the initial state, shape (n, n).

    Raises
    ------
    DimensionMismatch
        If any shape is inconsistent with the others.
    SingularDD
        If D Dᵀ is not positive definite.
    V0NotSPD
        If V0 is not symmetric positive definite.

    Notes
    -----
    Instances are immutable (frozen dataclass, read-only arrays) and
    safe to share across threads.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x0_mean: np.ndarray
    V0: np.ndarray

    def __post_init__(self):
        for name, ndim in zip(_FIELDS, (2, 2, 2, 2, 1, 2)):
            object.__setattr__(self, name, _ingest(name, getattr(self, name), ndim))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got shape {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got shape {self.B.shape}")
        m = self.B.shape[1]
        if self.C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got shape {self.C.shape}")
        p = self.C.shape[0]
        if self.D.shape != (p, m):
            raise DimensionMismatch(f"D must have shape ({p}, {m}), got {self.D.shape}")
        if self.x0_mean.shape != (n,):
            raise DimensionMismatch(f"x0_mean must have shape ({n},), got {self.x0_mean.shape}")
        if self.V0.shape != (n, n):
            raise DimensionMismatch(f"V0 must have shape ({n}, {n}), got {self.V0.shape}")
        DDt = self.D @ self.D.T
        if not _linalg.is_spd(DDt):
            raise SingularDD("D Dᵀ is singular; every measurement needs a noise floor")
        asym = np.max(np.abs(self.V0 - self.V0.T), initial=0.0)
        if asym > 1e-10 * (1.0 + np.max(np.abs(self.V0), initial=0.0)):
            raise V0NotSPD("V0 is not symmetric")
        if not _linalg.is_spd(self.V0):
            raise V0NotSPD("V0 is not positive definite")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def noise_covariances(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (B Bᵀ, B Dᵀ, D Dᵀ)."""
        return self.B @ self.B.T, self.B @ self.D.T, self.D @ self.D.T


@dataclass(frozen=True)
class NormalizedModel(StateSpaceModel):
    """Model with uncorrelated noises: B Dᵀ = 0 (absolute tol 1e-12 per entry).

    Produced by ``normalize``, which also enforces reachability of (A, B)
    and observability of (A, C).
    """

    normalized: bool = True

    def __post_init__(self):
        super().__post_init__()
        cross = np.max(np.abs(self.B @ self.D.T), initial=0.0)
        if cross > CROSS_COV_TOL:
            raise ModelError(
                f"B Dᵀ has entries up to {cross:.3e}; run normalize() before "
                "constructing a NormalizedModel"
            )


@dataclass(frozen=True)
class Trajectory:
    """Sampled states and observations, plus the seed that produced them."""

    states: np.ndarray
    observations: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.states) != len(self.observations):
            raise DimensionMismatch("states and observations must have equal length")


def validate(A, B, C, D, x0_mean, V0) -> StateSpaceModel:
    """Build a model from raw arrays, checking every structural invariant."""
    return StateSpaceModel(A=A, B=B, C=C, D=D, x0_mean=x0_mean, V0=V0)


def reachability_matrix(model: StateSpaceModel, N: int) -> np.ndarray:
    """Block row [B, AB, ..., A^{N-1}B], shape (n, N*m)."""
    _check_block_count(N)
    blocks = []
    X = model.B
    for _ in range(N):
        blocks.append(X)
        X = model.A @ X
    return np.hstack(blocks)


def observability_matrix(model: StateSpaceModel, N: int) -> np.ndarray:
    """Block column stacking C A^{N-1} at the top down to C at the bottom."""
    _check_block_count(N)
    blocks = []
    X = model.C
    for _ in range(N):
        blocks.append(X)
        X = X @ model.A
    return np.vstack(blocks[::-1])


def powers_matrix(model: StateSpaceModel, N: int) -> np.ndarray:
    """Block column stacking A^{N-1} at the top down to I at the bottom."""
    _check_block_count(N)
    blocks = []
    X = np.eye(model.n)
    for _ in range(N):
        blocks.append(X)
        X = model.A @ X
    return np.vstack(blocks[::-1])


def _check_block_count(N: int) -> None:
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ValueError(f"block count N must be a positive integer, got {N!r}")


def normalize(model: StateSpaceModel) -> NormalizedModel:
    """Decouple process and measurement noise.

    If B Dᵀ already vanishes the matrices pass through unchanged.
    Otherwise the state equation is rewritten with

        Ã = A − B Dᵀ (D Dᵀ)⁻¹ C,
        B̃ B̃ᵀ = B (I − Dᵀ (D Dᵀ)⁻¹ D) Bᵀ,

    where B̃ is the rank-truncated symmetric square-root factor, padded
    with zero columns so B̃ and a correspondingly padded D̃ share one
    noise vector with B̃ D̃ᵀ = 0 structurally. Filtering depends on B
    and D only through B Bᵀ, B Dᵀ, and D Dᵀ, so the factor and padding
    choices are immaterial.

    Raises
    ------
    NotReachable, NotObservable
        If the transformed pair fails its rank test.
    """
    BBt, BDt, DDt = model.noise_covariances()
    if np.max(np.abs(BDt), initial=0.0) <= CROSS_COV_TOL:
        candidate = NormalizedModel(
            A=model.A, B=model.B, C=model.C, D=model.D,
            x0_mean=model.x0_mean, V0=model.V0,
        )
    else:
        n, m, p = model.n, model.m, model.p
        W = _linalg.solve_spd(DDt, np.hstack([model.C, BDt.T]), "D Dᵀ")
        A_t = model.A - BDt @ W[:, :n]
        Sigma = _linalg.sym(BBt - BDt @ W[:, n:])
        B_hat = _linalg.truncated_sqrt(Sigma)
        r = B_hat.shape[1]
        log.debug("normalize: reduced process noise rank %d of %d", r, n)
        candidate = NormalizedModel(
            A=A_t,
            B=np.hstack([B_hat, np.zeros((n, m))]),
            C=model.C,
            D=np.hstack([np.zeros((p, r)), model.D]),
            x0_mean=model.x0_mean,
            V0=model.V0,
        )
    n = candidate.n
    if _linalg.rank_from_singular_values(reachability_matrix(candidate, n), RANK_REL_TOL) < n:
        raise NotReachable("(A, B) is not reachable after normalization")
    if _linalg.rank_from_singular_values(observability_matrix(candidate, n), RANK_REL_TOL) < n:
        raise NotObservable("(A, C) is not observable")
    return candidate


def simulate(model: StateSpaceModel, steps: int, seed: int) -> Trajectory:
    """Sample a nominal trajectory of the given length.

    x₀ is drawn as x0_mean + L z with L the lower Cholesky factor of V0
    and z standard normal; each step then draws v_k ~ N(0, I_m). The
    result is a deterministic function of (model, steps, seed).
    """
    if steps < 0:
        raise ValueError(f"steps must be nonnegative, got {steps}")
    rng = np.random.default_rng(seed)
    L0 = _linalg.cholesky_spd(model.V0, "V0")
    x = model.x0_mean + L0 @ rng.standard_normal(model.n)
    states = np.empty((steps, model.n))
    observations = np.empty((steps, model.p))
    for k in range(steps):
        v = rng.standard_normal(model.m)
        states[k] = x
        observations[k] = model.C @ x + model.D @ v
        x = model.A @ x + model.B @ v
    return Trajectory(states=states, observations=observations, seed=int(seed))


def _reject_token(token: str):
    raise ModelIOError(f"non-finite literal {token!r} in model file")


def load_model(path) -> StateSpaceModel:
    """Read a model from JSON.

    The file must be an object with exactly the keys A, B, C, D (row-major
    nested arrays), x0_mean (flat array), and V0 (nested array). NaN and
    infinity are rejected.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelIOError(f"model: {path} not readable") from exc
    try:
        data = json.loads(text, parse_constant=_reject_token)
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"model: {path} is not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ModelIOError(f"model: {path} must contain a JSON object")
    missing = sorted(set(_FIELDS) - set(data))
    extra = sorted(set(data) - set(_FIELDS))
    if missing:
        raise ModelIOError(f"model: {path} missing keys {missing}")
    if extra:
        raise ModelIOError(f"model: {path} has unexpected keys {extra}")
    return StateSpaceModel(
        A=data["A"], B=data["B"], C=data["C"], D=data["D"],
        x0_mean=data["x0_mean"], V0=data["V0"],
    )
