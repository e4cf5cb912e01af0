"""Thompson-metric geometry and convergence certification.

The covariance recursions of this package are strict contractions on
the SPD cone under the Thompson part metric once the per-step
reweighting Phi_k stays below a model-dependent threshold phi_N. This
module computes that threshold from an N-block lifted ("downsampled")
system, bounds the contraction coefficient, and assembles the whole
argument into a certificate: a maximum divergence budget c_max (or
maximum risk parameter theta_max at tau = 1) under which the filter
provably converges to a unique fixed point.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from robkf import _linalg
from robkf.divergence import check_tau, gamma
from robkf.errors import (
    ConfigError,
    DomainViolation,
    NotObservable,
    NotReachable,
    NotSPD,
    RiskSensitiveModeUnsupported,
    SearchFailed,
)
from robkf.model import NormalizedModel, StateSpaceModel, normalize
from robkf.riccati import standard_riccati

__all__ = [
    "DownsampledSystem",
    "ConvergenceCertificate",
    "thompson_metric",
    "contraction_bound",
    "build_downsampled",
    "downsampled_map",
    "find_phi_N",
    "certify",
]

log = logging.getLogger(__name__)

_PHI_SEARCH_REL_TOL = 1e-6
_PHI_EDGE = 1e-9


def thompson_metric(P: np.ndarray, Q: np.ndarray) -> float:
    """Thompson part metric d_T(P, Q) = max |log lam_i|.

    The lam_i are the generalized eigenvalues of (Q, P), so the value is
    symmetric in its arguments and invariant under inversion and joint
    congruence. Raises NotSPD unless both arguments are SPD.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise NotSPD(f"shape mismatch {P.shape} vs {Q.shape}")
    return _linalg.thompson_distance(P, Q)


def contraction_bound(M: np.ndarray, W1: np.ndarray, W2: np.ndarray) -> float:
    """Lipschitz bound in d_T for the map P ↦ M (P⁻¹ + W1)⁻¹ Mᵀ + W2.

    Returns (sqrt(s) / (1 + sqrt(1+s)))² with s the largest eigenvalue
    of W1⁻¹ Mᵀ W2⁻¹ M, computed through Cholesky whitening. Always in
    [0, 1): the map is a strict contraction.
    """
    M = np.asarray(M, dtype=float)
    L1 = _linalg.cholesky_spd(np.asarray(W1, dtype=float), "W1")
    L2 = _linalg.cholesky_spd(np.asarray(W2, dtype=float), "W2")
    Y = la.solve_triangular(L2, M, lower=True)
    Z = la.solve_triangular(L1, Y.T, lower=True).T
    s = float(la.svdvals(Z)[0] ** 2) if Z.size else 0.0
    root = np.sqrt(s)
    return float((root / (1.0 + np.sqrt(1.0 + s))) ** 2)


@dataclass(frozen=True)
class DownsampledSystem:
    """N-block lifted system whose one-step map equals N filter steps.

    Carries the block reachability/observability structure (R_N, O_N,
    O_N_R), the block noise and impulse-response matrices (D_N, H_N,
    L_N), the derived J_N and Omega_N, and the threshold tilde_phi_N
    above which the lifted map's domain collapses. G_N, Z, T, and A_N
    are cached intermediates reused by the map and the phi search.
    """

    model: NormalizedModel
    N: int
    R_N: np.ndarray
    O_N: np.ndarray
    O_N_R: np.ndarray
    D_N: np.ndarray
    H_N: np.ndarray
    L_N: np.ndarray
    J_N: np.ndarray
    Omega_N: np.ndarray
    tilde_phi_N: float
    G_N: np.ndarray
    Z: np.ndarray
    T: np.ndarray
    A_N: np.ndarray


def build_downsampled(model: NormalizedModel, N: int) -> DownsampledSystem:
    """Assemble the N-block lifted system.

    H_N and L_N are strictly upper block Toeplitz with blocks
    C A^{k-1} B and A^{k-1} B on the k-th superdiagonal; O_N and O_N_R
    stack their powers from the highest at the top down to C (resp. I)
    at the bottom. All factorizations are dense; for the intended
    N <= ~50 and small n, m, p the matrices stay a few hundred wide.

    Raises
    ------
    NotObservable, NotReachable
        If Omega_N or the zero-reweighting W fail positive definiteness
        although N >= n. For N < n a singular Omega_N is only logged.
    """
    if not isinstance(model, NormalizedModel):
        model = normalize(model)
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ConfigError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    n, m, p = model.n, model.m, model.p
    if N < n:
        log.warning("N=%d below the state dimension %d; Omega_N may be singular", N, n)

    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(model.A @ powers[-1])
    R_N = np.hstack([powers[j] @ model.B for j in range(N)])
    O_N = np.vstack([model.C @ powers[N - 1 - i] for i in range(N)])
    O_N_R = np.vstack([powers[N - 1 - i] for i in range(N)])
    D_N = np.kron(np.eye(N), model.D)
    H_N = np.zeros((N * p, N * m))
    L_N = np.zeros((N * n, N * m))
    for i in range(N):
        for j in range(i + 1, N):
            k = j - i
            H_N[i * p:(i + 1) * p, j * m:(j + 1) * m] = model.C @ powers[k - 1] @ model.B
            L_N[i * n:(i + 1) * n, j * m:(j + 1) * m] = powers[k - 1] @ model.B
    DD_N = D_N @ D_N.T
    G_N = _linalg.sym(DD_N + H_N @ H_N.T)
    G_inv_O = _linalg.solve_spd(G_N, O_N, "block innovation covariance")
    J_N = O_N_R - L_N @ H_N.T @ G_inv_O
    Omega_N = _linalg.sym(O_N.T @ G_inv_O)
    Z = _linalg.sym(np.eye(N * m) + H_N.T @ _linalg.solve_spd(DD_N, H_N, "D_N D_Nᵀ"))
    T = _linalg.sym(L_N @ _linalg.solve_spd(Z, L_N.T, "Z"))
    t_max = _linalg.eigvalsh_sym(T)[-1]
    tilde_phi_N = 1.0 / t_max if t_max > 0.0 else float("inf")

    if not _linalg.is_spd(Omega_N):
        if N >= n:
            raise NotObservable(f"Omega_N is not positive definite at N={N} >= n={n}")
        log.info("Omega_N singular at N=%d < n=%d", N, n)
    W0 = _linalg.sym(R_N @ _linalg.solve_spd(Z, R_N.T, "Z"))
    if N >= n and not _linalg.is_spd(W0):
        raise NotReachable(f"zero-reweighting W is not positive definite at N={N} >= n={n}")

    return DownsampledSystem(
        model=model, N=N, R_N=R_N, O_N=O_N, O_N_R=O_N_R, D_N=D_N, H_N=H_N,
        L_N=L_N, J_N=J_N, Omega_N=Omega_N, tilde_phi_N=tilde_phi_N,
        G_N=G_N, Z=Z, T=T, A_N=powers[N],
    )


def _reweighted_blocks(ds: DownsampledSystem, bar_phi: np.ndarray):
    """Omega, Q, W of the lifted map under the block reweighting bar_phi.

    Q must stay PD for the map to exist; solve_spd raises NotSPD past
    the boundary.
    """
    Nn = ds.L_N.shape[0]
    M = la.solve(np.eye(Nn) - bar_phi @ ds.T, bar_phi)
    Omega = _linalg.sym(ds.Omega_N - ds.J_N.T @ M @ ds.J_N)
    Q = _linalg.sym(ds.Z - ds.L_N.T @ bar_phi @ ds.L_N)
    W = _linalg.sym(ds.R_N @ _linalg.solve_spd(Q, ds.R_N.T, "Q"))
    return Omega, Q, W


def downsampled_map(ds: DownsampledSystem, bar_phi: np.ndarray, P: np.ndarray) -> np.ndarray:
    """One application of the lifted map: alpha (P⁻¹ + Omega)⁻¹ alphaᵀ + W.

    ``bar_phi`` collects N per-step reweightings as an (Nn, Nn)
    block-diagonal PSD matrix with every eigenvalue below tilde_phi_N.
    With bar_phi = 0 the result is exactly N compositions of the
    standard Riccati map; with N identical blocks Phi it is N
    compositions of the fixed-Phi map.

    The block system defining alpha is solved with its right block
    column scaled through by -bar_phi, which keeps singular bar_phi
    (including zero) exact instead of requiring bar_phi⁻¹.
    """
    bar_phi = _linalg.sym(np.asarray(bar_phi, dtype=float))
    P = np.asarray(P, dtype=float)
    Nn = ds.L_N.shape[0]
    if bar_phi.shape != (Nn, Nn):
        raise DomainViolation(f"bar_phi must have shape ({Nn}, {Nn}), got {bar_phi.shape}")
    w = _linalg.eigvalsh_sym(bar_phi)
    if w[0] < -1e-10:
        raise DomainViolation(f"bar_phi must be PSD (min eigenvalue {w[0]:.3e})")
    if np.isfinite(ds.tilde_phi_N) and w[-1] >= ds.tilde_phi_N:
        raise DomainViolation(
            f"bar_phi eigenvalue {w[-1]:.6e} reaches tilde_phi_N = {ds.tilde_phi_N:.6e}"
        )

    Np = ds.G_N.shape[0]
    top = np.hstack([ds.G_N, -(ds.H_N @ ds.L_N.T) @ bar_phi])
    bot = np.hstack([ds.L_N @ ds.H_N.T, np.eye(Nn) - (ds.L_N @ ds.L_N.T) @ bar_phi])
    try:
        Y = la.solve(np.vstack([top, bot]), np.vstack([ds.O_N, ds.O_N_R]))
        Omega, _, W = _reweighted_blocks(ds, bar_phi)
    except (la.LinAlgError, NotSPD) as exc:
        raise DomainViolation(f"lifted map undefined for this bar_phi: {exc}") from exc
    alpha = ds.A_N - ds.R_N @ (ds.H_N.T @ Y[:Np] - ds.L_N.T @ (bar_phi @ Y[Np:]))
    try:
        X = _linalg.inv_spd(_linalg.inv_spd(P, "P") + Omega, "P⁻¹ + Omega")
    except NotSPD as exc:
        raise DomainViolation(f"P⁻¹ + Omega not positive definite: {exc}") from exc
    return _linalg.sym(alpha @ X @ alpha.T + W)


def _phi_feasible(ds: DownsampledSystem, phi: float) -> bool:
    # ill-conditioned solves near the PD boundary must count as
    # infeasible, not return garbage, so promote LinAlgWarning
    Nn = ds.L_N.shape[0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", la.LinAlgWarning)
            Omega, _, W = _reweighted_blocks(ds, phi * np.eye(Nn))
    except (la.LinAlgError, la.LinAlgWarning, NotSPD):
        return False
    return _linalg.is_spd(Omega) and _linalg.is_spd(W)


def find_phi_N(ds: DownsampledSystem, rel_tol: float = _PHI_SEARCH_REL_TOL) -> float:
    """Largest scalar phi keeping the lifted map's Omega and W both PD.

    Bisection over (0, tilde_phi_N), justified by the monotonicity of
    Omega (nonincreasing) and W (nondecreasing) in the reweighting. The
    PD predicate is plain Cholesky success: no eigenvalue slack, and any
    failed or non-finite solve counts as infeasible.

    Raises
    ------
    SearchFailed
        If no phi in the open interval passes, which signals a
        degenerate or numerically broken model.
    """
    if np.isfinite(ds.tilde_phi_N):
        hi = ds.tilde_phi_N * (1.0 - _PHI_EDGE)
        if _phi_feasible(ds, hi):
            return hi
    else:
        # no finite threshold (L_N = 0): bracket by doubling instead
        scale = _linalg.eigvalsh_sym(ds.R_N @ ds.R_N.T)[-1]
        hi = 1.0 / max(scale, 1e-300)
        doubled = 0
        while _phi_feasible(ds, hi) and doubled < 200:
            hi *= 2.0
            doubled += 1
        if doubled == 200:
            log.warning("phi search: feasibility never failed while doubling; returning %e", hi)
            return hi
    lo = 0.0
    for _ in range(200):
        if (hi - lo) <= rel_tol * hi or hi < 1e-300:
            break
        mid = 0.5 * (lo + hi)
        if _phi_feasible(ds, mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise SearchFailed(
            "no feasible phi found in (0, tilde_phi_N); the lifted system is degenerate"
        )
    log.debug("phi_N = %.9e (tilde_phi_N = %.9e)", lo, ds.tilde_phi_N)
    return lo


@dataclass(frozen=True)
class ConvergenceCertificate:
    """Proof data for filter convergence on one model.

    In robust mode, every divergence budget c in (0, c_max] yields an
    iteration that contracts to a unique fixed point; in risk-sensitive
    mode (tau = 1 only) the same holds for every fixed theta in
    (0, theta_max].
    """

    tau: float
    q: int
    N: int
    mode: str
    P_bar_q: np.ndarray
    sigma_n: float
    tilde_phi_N: float
    phi_N: float
    theta_bar: float
    c_max: Optional[float] = None
    theta_max: Optional[float] = None

    def as_dict(self) -> dict:
        out = {
            "tau": self.tau,
            "q": self.q,
            "N": self.N,
            "mode": self.mode,
            "P_bar_q": self.P_bar_q.tolist(),
            "sigma_n": self.sigma_n,
            "tilde_phi_N": self.tilde_phi_N,
            "phi_N": self.phi_N,
            "theta_bar": self.theta_bar,
        }
        if self.c_max is not None:
            out["c_max"] = self.c_max
        if self.theta_max is not None:
            out["theta_max"] = self.theta_max
        return out


def certify(
    model: StateSpaceModel,
    tau: float,
    q: int = 40,
    N: int | None = None,
    mode: str = "robust",
) -> ConvergenceCertificate:
    """Certify convergence of the robust (or tau=1 risk-sensitive) filter.

    Runs q standard Riccati steps from B Bᵀ to get the floor P_bar_q
    that every robust trajectory dominates, finds the reweighting
    threshold phi_N on the N-block lifted system, converts it through
    sigma_n = lambda_min(P_bar_q) into the risk bound theta_bar, and
    evaluates the budget c_max = gamma(P_bar_q, theta_bar, tau).

    Parameters
    ----------
    model : StateSpaceModel
        Normalized internally; must be reachable and observable.
    tau : float in [0, 1]
    q : int, default 40
        Riccati burn-in length; c_max is nondecreasing in q.
    N : int, optional
        Block length of the lifted system, default max(n, 50).
    mode : "robust" or "risk_sensitive"
        Risk-sensitive certification exists only at tau = 1.

    Raises
    ------
    RiskSensitiveModeUnsupported
        For mode="risk_sensitive" with tau < 1.
    DomainViolation
        If sigma_n * phi_N >= 1, where no admissible theta_bar exists.
    """
    tau = check_tau(tau)
    if mode not in ("robust", "risk_sensitive"):
        raise ConfigError(f"mode must be 'robust' or 'risk_sensitive', got {mode!r}")
    if mode == "risk_sensitive" and tau != 1.0:
        raise RiskSensitiveModeUnsupported(
            f"risk-sensitive certification covers tau = 1 only, got tau = {tau}"
        )
    if not isinstance(q, (int, np.integer)) or q < 1:
        raise ConfigError(f"q must be a positive integer, got {q!r}")
    nm = model if isinstance(model, NormalizedModel) else normalize(model)
    if N is None:
        N = max(nm.n, 50)
    if not isinstance(N, (int, np.integer)) or N < nm.n:
        raise ConfigError(f"N must be an integer >= n = {nm.n}, got {N!r}")

    P_bar = nm.B @ nm.B.T
    for _ in range(q):
        P_bar = standard_riccati(nm, P_bar)
    sigma_n = float(_linalg.eigvalsh_sym(P_bar)[0])
    if sigma_n <= 0.0:
        raise NotSPD(f"P_bar_q is singular after q={q} steps; increase q")

    ds = build_downsampled(nm, int(N))
    phi_N = find_phi_N(ds)
    x = sigma_n * phi_N
    if x >= 1.0:
        raise DomainViolation(
            f"sigma_n * phi_N = {x:.6e} >= 1; no admissible risk parameter exists"
        )
    if tau < 1.0:
        theta_bar = -np.expm1((1.0 - tau) * np.log1p(-x)) / ((1.0 - tau) * sigma_n)
    else:
        theta_bar = -np.log1p(-x) / sigma_n

    cert = ConvergenceCertificate(
        tau=tau,
        q=int(q),
        N=int(N),
        mode=mode,
        P_bar_q=P_bar,
        sigma_n=sigma_n,
        tilde_phi_N=float(ds.tilde_phi_N),
        phi_N=float(phi_N),
        theta_bar=float(theta_bar),
        c_max=float(gamma(P_bar, theta_bar, tau)) if mode == "robust" else None,
        theta_max=float(theta_bar) if mode == "risk_sensitive" else None,
    )
    log.info(
        "certified tau=%.3g mode=%s: phi_N=%.6e, theta_bar=%.6e, %s=%.6e",
        tau, mode, cert.phi_N, cert.theta_bar,
        "c_max" if mode == "robust" else "theta_max",
        cert.c_max if mode == "robust" else cert.theta_max,
    )
    return cert
