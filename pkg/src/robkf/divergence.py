"""The tau-divergence family and the scalar machinery built on it.

Everything here reduces to eigenvalue computations: the divergence
between two Gaussians, the radius function gamma(P, theta), its inverse
solve_theta, the reweighted covariance v_update, and the bounds on the
inverse gap Phi = P⁻¹ − V⁻¹.

tau interpolates between a Kullback-Leibler-type divergence at tau=0
(twice the textbook KL, no 1/2 factor) and a log-weighted divergence at
tau=1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from robkf import _linalg
from robkf.errors import (
    DimensionMismatch,
    DomainViolation,
    NonConvergence,
    NotOrdered,
    NotSPD,
    ToleranceUnreachable,
)

__all__ = [
    "GaussianDensity",
    "tau_divergence",
    "gamma",
    "solve_theta",
    "v_update",
    "phi_gap",
    "phi_upper_bound",
]

# Means are considered equal when they differ by at most this, per entry.
MEAN_TOL = 1e-12

_RESIDUAL_TOL = 1e-10
_BRACKET_EPS = 1e-12
_MAX_BISECT = 300


@dataclass(frozen=True)
class GaussianDensity:
    """Gaussian with the given mean vector and SPD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"mean shape {mean.shape} and cov shape {cov.shape} are inconsistent"
            )
        _linalg.cholesky_spd(cov, "cov")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise DomainViolation(f"tau must lie in [0, 1], got {tau}")
    return tau


def _spd_eigvals(P: np.ndarray, what: str = "P") -> np.ndarray:
    """Ascending eigenvalues, rejecting clearly indefinite input."""
    w = _linalg.eigvalsh_sym(np.asarray(P, dtype=float))
    if w.size == 0:
        raise DimensionMismatch(f"{what} is empty")
    if w[0] < -1e-10 * max(1.0, abs(w[-1])):
        raise NotSPD(f"{what} has a negative eigenvalue ({w[0]:.3e})")
    return np.clip(w, 0.0, None)


def _gamma_from_eigvals(d: np.ndarray, theta: float, tau: float) -> float:
    if theta == 0.0:
        return 0.0
    if tau < 1.0:
        x = theta * (1.0 - tau) * d
        if np.max(x) >= 1.0:
            raise DomainViolation(
                f"theta={theta:.6e} outside the domain: theta*(1-tau)*sigma1(P) must be < 1"
            )
        if tau == 0.0:
            # log(1-y) + y/(1-y) per eigenvalue, y = theta*d
            return float(np.sum(np.log1p(-x) + x / (1.0 - x)))
        a1 = tau / (tau - 1.0)
        a2 = 1.0 / (tau - 1.0)
        w = np.log1p(-x)
        e1 = np.expm1(a1 * w)
        return float(np.sum(-e1 / tau + (np.expm1(a2 * w) - e1) / (1.0 - tau)))
    x = theta * d
    # x e^x - (e^x - 1); exp overflows past ~709, the sum is +inf there
    with np.errstate(over="ignore", invalid="ignore"):
        terms = x * np.exp(x) - np.expm1(x)
    if not np.all(np.isfinite(terms)):
        return float("inf")
    return float(np.sum(terms))


def gamma(P: np.ndarray, theta: float, tau: float) -> float:
    """Divergence radius reached by the exponential reweighting of P.

    Equals tau_divergence(N(0, v_update(P, theta, tau)), N(0, P), tau);
    evaluated directly on the eigenvalues of P, one branch per tau
    regime. Zero iff theta is zero, strictly increasing in theta.

    Raises
    ------
    DomainViolation
        If theta < 0, or tau < 1 with theta*(1-tau)*sigma1(P) >= 1.
    """
    tau = check_tau(tau)
    theta = float(theta)
    if theta < 0.0:
        raise DomainViolation(f"theta must be nonnegative, got {theta}")
    return _gamma_from_eigvals(_spd_eigvals(P), theta, tau)


def solve_theta(P: np.ndarray, c: float, tau: float) -> float:
    """Invert gamma: the unique theta > 0 with gamma(P, theta, tau) = c.

    Bisection on the admissible interval; gamma's strict monotonicity in
    theta makes the bracket valid. The eigendecomposition of P is done
    once and reused across iterations. Deterministic: identical inputs
    give bit-identical output.

    Parameters
    ----------
    P : SPD matrix
    c : positive divergence radius
    tau : in [0, 1]

    Returns
    -------
    theta with |gamma(P, theta, tau) - c| <= 1e-10 * max(1, c).

    Raises
    ------
    ToleranceUnreachable
        If c exceeds every attainable radius (floating-point breakdown
        near the domain boundary for tau < 1).
    NonConvergence
        If bisection fails to meet both stopping conditions.
    """
    tau = check_tau(tau)
    c = float(c)
    if not c > 0.0:
        raise DomainViolation(f"radius c must be positive, got {c}")
    d = _spd_eigvals(P)
    d_max = float(d[-1])
    if d_max <= 0.0:
        raise NotSPD("P is numerically zero")

    def g(theta: float) -> float:
        return _gamma_from_eigvals(d, theta, tau)

    if tau < 1.0:
        hi = (1.0 - _BRACKET_EPS) / ((1.0 - tau) * d_max)
        if g(hi) < c:
            raise ToleranceUnreachable(
                f"radius c={c:.6e} is beyond the attainable range for tau={tau}"
            )
    else:
        hi = 1.0 / d_max
        for _ in range(200):
            if g(hi) >= c:
                break
            hi *= 2.0
        else:
            raise ToleranceUnreachable(f"no bracket found for c={c:.6e} at tau=1")

    lo = 0.0
    residual_tol = _RESIDUAL_TOL * max(1.0, c)
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        val = g(mid)
        if abs(val - c) <= residual_tol and (hi - lo) <= _BRACKET_EPS * max(1.0, mid):
            return mid
        if val < c:
            lo = mid
        else:
            hi = mid
    raise NonConvergence(
        f"theta bisection did not converge for c={c:.6e}, tau={tau}"
    )


def v_update(P: np.ndarray, theta: float, tau: float) -> np.ndarray:
    """Least-favorable reweighting of the covariance P.

    Computes L f(Lᵀ L) Lᵀ with L the lower Cholesky factor of P and

        f(M) = (I - theta (1-tau) M)^{1/(tau-1)}   for tau < 1,
        f(M) = exp(theta M)                        for tau = 1,

    the matrix functions evaluated by symmetric eigendecomposition. The
    value does not depend on which factor L of P is used. For theta > 0
    the result dominates P strictly (V > P in the Loewner order); at
    theta = 0 it equals P.

    Raises
    ------
    DomainViolation
        If tau < 1 and theta (1-tau) sigma1(P) >= 1, or the tau = 1
        exponential overflows.
    """
    tau = check_tau(tau)
    theta = float(theta)
    if theta < 0.0:
        raise DomainViolation(f"theta must be nonnegative, got {theta}")
    P = np.asarray(P, dtype=float)
    if theta == 0.0:
        return _linalg.sym(P)
    L = _linalg.cholesky_spd(P, "P")
    w, U = _linalg.eigh_sym(L.T @ L)
    if tau < 1.0:
        y = 1.0 - theta * (1.0 - tau) * w
        if np.min(y) <= 0.0:
            raise DomainViolation(
                f"theta={theta:.6e} outside the domain: theta*(1-tau)*sigma1(P) must be < 1"
            )
        f = np.power(y, 1.0 / (tau - 1.0))
    else:
        with np.errstate(over="raise"):
            try:
                f = np.exp(theta * w)
            except FloatingPointError as exc:
                raise DomainViolation(
                    f"theta={theta:.6e} overflows exp(theta P)"
                ) from exc
    return _linalg.sym(L @ (U * f) @ U.T @ L.T)


def phi_gap(P: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Inverse gap P⁻¹ − V⁻¹ for Loewner-ordered V ≥ P, symmetrized.

    Raises NotOrdered if V − P has an eigenvalue below −1e-10. The
    result is PSD, and PD whenever the ordering is strict.
    """
    P = np.asarray(P, dtype=float)
    V = np.asarray(V, dtype=float)
    if P.shape != V.shape:
        raise DimensionMismatch(f"P shape {P.shape} != V shape {V.shape}")
    gap_min = _linalg.eigvalsh_sym(V - P)[0]
    if gap_min < -1e-10:
        raise NotOrdered(f"V does not dominate P (min eig of V-P is {gap_min:.3e})")
    return _linalg.sym(_linalg.inv_spd(P, "P") - _linalg.inv_spd(V, "V"))


def phi_upper_bound(theta: float, tau: float, d_bar: float) -> float:
    """Scalar bound f_theta(d_bar) dominating every eigenvalue of phi_gap.

    Whenever P >= d_bar I, the gap P⁻¹ − v_update(P, theta, tau)⁻¹ is
    bounded above by f_theta(d_bar) I. At tau = 0 the bound is theta
    itself, independent of d_bar.
    """
    tau = check_tau(tau)
    theta = float(theta)
    d_bar = float(d_bar)
    if d_bar <= 0.0:
        raise DomainViolation(f"d_bar must be positive, got {d_bar}")
    if theta < 0.0:
        raise DomainViolation(f"theta must be nonnegative, got {theta}")
    if theta == 0.0:
        return 0.0
    if tau == 0.0:
        # (1 - (1 - theta d)^1)/d = theta for every d
        return theta
    if tau < 1.0:
        x = theta * (1.0 - tau) * d_bar
        if x >= 1.0:
            raise DomainViolation(
                f"theta={theta:.6e} outside the domain: theta*(1-tau)*d_bar must be < 1"
            )
        return -np.expm1(np.log1p(-x) / (1.0 - tau)) / d_bar
    return -np.expm1(-theta * d_bar) / d_bar


def tau_divergence(f_tilde: GaussianDensity, f: GaussianDensity, tau: float) -> float:
    """Divergence D_tau(f_tilde || f) between two Gaussians.

    The covariance part is a sum over the generalized eigenvalues lam of
    (f_tilde.cov, f.cov):

        tau = 0:      lam - 1 - log lam
        0 < tau < 1:  (1 - lam^tau)/tau + (lam - lam^tau)/(1 - tau)
        tau = 1:      lam log lam - lam + 1

    The mean difference contributes (1-tau)⁻¹ ||Δm||² weighted by
    f.cov⁻¹ for tau < 1; at tau = 1 any nonzero mean difference makes
    the divergence +inf. Invariant under the choice of symmetric factor
    of f.cov. At tau = 0 this is twice the textbook Gaussian KL.
    """
    tau = check_tau(tau)
    if f_tilde.dim != f.dim:
        raise DimensionMismatch(
            f"densities have different dimensions {f_tilde.dim} and {f.dim}"
        )
    dm = f.mean - f_tilde.mean
    means_equal = np.max(np.abs(dm), initial=0.0) <= MEAN_TOL
    lam = np.clip(la.eigh(f_tilde.cov, f.cov, eigvals_only=True), 1e-300, None)
    if tau == 0.0:
        cov_part = float(np.sum(lam - 1.0 - np.log(lam)))
    elif tau < 1.0:
        lt = np.power(lam, tau)
        cov_part = float(np.sum((1.0 - lt) / tau + (lam - lt) / (1.0 - tau)))
    else:
        if not means_equal:
            return float("inf")
        cov_part = float(np.sum(lam * np.log(lam) - lam + 1.0))
    mean_part = 0.0
    if not means_equal:
        mean_part = float(dm @ _linalg.solve_spd(f.cov, dm, "cov")) / (1.0 - tau)
    return max(cov_part + mean_part, 0.0)
