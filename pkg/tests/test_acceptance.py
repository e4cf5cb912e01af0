"""End-to-end acceptance gate.

Each test prints one ``criterion N: PASS/FAIL`` line (visible with
``pytest -s`` or on failure) and then asserts, so the suite doubles as a
human-readable checklist of the shipped guarantees.
"""

import time

import numpy as np
import pytest
import scipy.linalg as la

from robkf import (
    FilterConfig,
    build_downsampled,
    certify,
    contraction_bound,
    downsampled_map,
    find_phi_N,
    gamma,
    iterate_to_fixed_point,
    normalize,
    phi_gap,
    phi_upper_bound,
    risk_sensitive_map,
    run_filter,
    solve_theta,
    standard_riccati,
    thompson_metric,
)

from conftest import random_model, random_spd

TAUS = (0.0, 0.5, 1.0)
C_MAX_WANT = {0.0: 1.22e-1, 0.5: 1.01e-1, 1.0: 8.62e-2}
P_BAR_WANT = 1e2 * np.array([[1.2568, 1.3641], [1.3641, 1.5025]])


def _line(name, ok, detail):
    print(f"criterion {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


@pytest.fixture(scope="module")
def certificates(example_model_module):
    return {tau: certify(example_model_module, tau) for tau in TAUS}


@pytest.fixture(scope="module")
def example_model_module():
    from conftest import example_matrices
    from robkf import StateSpaceModel
    A, B, C, D = example_matrices()
    return StateSpaceModel(A=A, B=B, C=C, D=D, x0_mean=np.zeros(2), V0=np.eye(2))


def test_criterion_1_golden_reproduction(example_model_module):
    t0 = time.perf_counter()
    certs = {tau: certify(example_model_module, tau) for tau in TAUS}
    elapsed = time.perf_counter() - t0

    cert0 = certs[0.0]
    p_ok = bool(np.all(np.abs(cert0.P_bar_q - P_BAR_WANT) <= 5e-4 * np.abs(P_BAR_WANT)))
    tilde_ok = abs(cert0.tilde_phi_N - 1.3335e-3) <= 1e-3 * 1.3335e-3
    phi_ok = abs(cert0.phi_N - 1.3328e-3) <= 5e-3 * 1.3328e-3
    c_ok = all(
        abs(certs[tau].c_max - want) <= 0.02 * want for tau, want in C_MAX_WANT.items()
    )
    time_ok = elapsed < 10.0
    ok = p_ok and tilde_ok and phi_ok and c_ok and time_ok
    detail = (
        f"P_bar_q 4sf {p_ok}, tilde_phi {cert0.tilde_phi_N:.6e}, "
        f"phi_N {cert0.phi_N:.6e}, "
        f"c_max {[round(certs[t].c_max, 6) for t in TAUS]}, {elapsed:.2f}s"
    )
    assert _line("1", ok, detail)


def test_criterion_2_convergence_behavior(example_model_module, certificates):
    t0 = time.perf_counter()
    worst_d, worst_drift = 0.0, 0.0
    for tau in TAUS:
        c = certificates[tau].c_max
        ft = run_filter(
            example_model_module, FilterConfig.robust(tau, c), np.zeros((120, 1))
        )
        for k in range(60, 120):
            worst_d = max(worst_d, thompson_metric(ft.P_seq[k - 1], ft.P_seq[k]))
        theta60 = ft.theta_seq[59]
        for k in range(20, 121):
            worst_drift = max(worst_drift, abs(ft.theta_seq[k - 1] - theta60) / theta60)
    elapsed = time.perf_counter() - t0
    ok = worst_d < 1e-6 and worst_drift < 1e-3 and elapsed < 1.0
    detail = f"max d_T {worst_d:.2e}, max theta drift {worst_drift:.2e}, {elapsed:.2f}s"
    assert _line("2", ok, detail)


def test_criterion_3_uniqueness():
    rng = np.random.default_rng(2026)
    worst_gap, worst_rho = 0.0, 0.0
    for i in range(10):
        n = 2 if i % 2 == 0 else 3
        tau = TAUS[i % 3]
        model = random_model(rng, n=n)
        c = certify(model, tau).c_max
        fps = [
            iterate_to_fixed_point(model, s * np.eye(n), "robust", tau=tau, c=c)
            for s in (1.0, 10.0)
        ]
        worst_gap = max(worst_gap, thompson_metric(fps[0].P_star, fps[1].P_star))
        worst_rho = max(worst_rho, max(fp.spectral_radius_closed_loop for fp in fps))
    ok = worst_gap <= 1e-7 and worst_rho < 1.0
    detail = f"max fixed-point gap {worst_gap:.2e}, max closed-loop radius {worst_rho:.4f}"
    assert _line("3", ok, detail)


def test_criterion_4_downsampled_equivalence():
    rng = np.random.default_rng(77)
    worst_std, worst_rs = 0.0, 0.0
    for i in range(20):
        N = 2 + i % 2
        model = normalize(random_model(rng, n=2))
        ds = build_downsampled(model, N)
        P = random_spd(rng, 2)

        got = downsampled_map(ds, np.zeros((2 * N, 2 * N)), P)
        want = P.copy()
        for _ in range(N):
            want = standard_riccati(model, want)
        worst_std = max(worst_std, np.linalg.norm(got - want) / np.linalg.norm(want))

        phi = 0.45 * find_phi_N(ds)  # inside the feasible set, below tilde/2
        Phi = phi * np.eye(2)
        got = downsampled_map(ds, la.block_diag(*([Phi] * N)), P)
        want = P.copy()
        for _ in range(N):
            want = risk_sensitive_map(model, want, Phi)
        worst_rs = max(worst_rs, np.linalg.norm(got - want) / np.linalg.norm(want))
    ok = worst_std <= 1e-8 and worst_rs <= 1e-8
    detail = f"max rel err: zero-phi {worst_std:.2e}, constant-phi {worst_rs:.2e}"
    assert _line("4", ok, detail)


def test_criterion_5a_gamma_monotone():
    rng = np.random.default_rng(5)
    taus = [0.0, 0.25, 0.5, 0.75, 1.0]
    ok = True
    for i in range(200):
        tau = taus[i % 5]
        n = 2 + i % 3
        P = random_spd(rng, n)
        F = rng.normal(size=(n, n))
        Q = P + F @ F.T
        cap = np.inf if tau == 1.0 else 1.0 / ((1.0 - tau) * np.linalg.eigvalsh(Q)[-1])
        hi = min(cap, 4.0) if np.isfinite(cap) else 4.0
        t1, t2 = 0.3 * hi, 0.8 * hi
        ok &= gamma(P, t2, tau) > gamma(P, t1, tau) + 1e-12
        ok &= gamma(Q, t1, tau) >= gamma(P, t1, tau) - 1e-12
        if not ok:
            break
    assert _line("5a", ok, "200 cases, theta strict, P ordered")


def test_criterion_5b_phi_bounded_along_certified_runs(
    example_model_module, certificates
):
    worst = -np.inf
    ok = True
    for tau in TAUS:
        cert = certificates[tau]
        ft = run_filter(
            example_model_module,
            FilterConfig.robust(tau, cert.c_max),
            np.zeros((120, 1)),
        )
        for k in range(cert.q + 1, 121):
            cap = phi_upper_bound(ft.theta_seq[k - 1], tau, cert.sigma_n)
            top = np.max(np.linalg.eigvalsh(phi_gap(ft.P_seq[k - 1], ft.V_seq[k])))
            worst = max(worst, top - cap)
            ok &= top <= cap + 1e-10
    assert _line("5b", ok, f"max eig excess over f_theta(sigma_n): {worst:.2e}")


def test_criterion_5c_robust_dominates_standard(example_model_module):
    norm = normalize(example_model_module)
    ok = True
    worst = np.inf
    for tau in TAUS:
        c = C_MAX_WANT[tau]
        ft = run_filter(example_model_module, FilterConfig.robust(tau, c), np.zeros((100, 1)))
        P_bar = norm.B @ norm.B.T
        for k in range(100):
            lo = np.min(np.linalg.eigvalsh(ft.P_seq[k] - P_bar))
            worst = min(worst, lo)
            ok &= lo >= -1e-10
            P_bar = standard_riccati(norm, P_bar)
    assert _line("5c", ok, f"min eig of P_k+1 - P_bar_k: {worst:.2e}")


def test_criterion_5d_contraction_ratios():
    rng = np.random.default_rng(55)
    ok = True
    worst = 0.0
    for _ in range(3):
        n = 3
        M = rng.normal(size=(n, n))
        W1, W2 = random_spd(rng, n), random_spd(rng, n)
        bound = contraction_bound(M, W1, W2)

        def h(P):
            return M @ np.linalg.inv(np.linalg.inv(P) + W1) @ M.T + W2

        for _ in range(100):
            P, Q = random_spd(rng, n), random_spd(rng, n)
            num = thompson_metric(h(P), h(Q))
            den = thompson_metric(P, Q)
            worst = max(worst, num / den - bound)
            ok &= num <= (bound + 1e-9) * den
    assert _line("5d", ok, f"max ratio excess over bound: {worst:.2e}")


def test_criterion_6_metric_axioms():
    rng = np.random.default_rng(6)
    ok = True
    for _ in range(100):
        n = 2 + rng.integers(0, 3)
        P, Q, R = (random_spd(rng, n) for _ in range(3))
        M = rng.normal(size=(n, n)) + 3 * np.eye(n)
        d = thompson_metric(P, Q)
        ok &= d >= 0
        ok &= thompson_metric(P, P) <= 1e-9
        ok &= abs(thompson_metric(Q, P) - d) <= 1e-9
        ok &= d <= thompson_metric(P, R) + thompson_metric(R, Q) + 1e-9
        ok &= abs(thompson_metric(np.linalg.inv(P), np.linalg.inv(Q)) - d) <= 1e-9
        ok &= abs(thompson_metric(M @ P @ M.T, M @ Q @ M.T) - d) <= 1e-9
        if not ok:
            break
    assert _line("6", ok, "100 pairs, axioms + inversion + congruence at 1e-9")


def test_criterion_7_risk_sensitive_certification(example_model_module):
    theta = certify(example_model_module, 1.0, mode="risk_sensitive").theta_max
    fps = [
        iterate_to_fixed_point(
            example_model_module, s * np.eye(2), "risk_sensitive", tau=1.0, theta=theta
        )
        for s in (1.0, 5.0)
    ]
    gap = thompson_metric(fps[0].P_star, fps[1].P_star)
    rho = max(fp.spectral_radius_closed_loop for fp in fps)
    ok = gap <= 1e-7 and rho < 1.0
    assert _line("7", ok, f"theta_max {theta:.6e}, gap {gap:.2e}, radius {rho:.4f}")


def test_criterion_8_degenerate_consistency(example_model_module):
    kf = run_filter(example_model_module, FilterConfig.standard(), np.zeros((100, 1)))
    rkf = run_filter(
        example_model_module, FilterConfig.robust(0.5, 1e-12), np.zeros((100, 1))
    )
    worst = max(
        thompson_metric(kf.P_seq[k], rkf.P_seq[k]) for k in range(100)
    )
    ok = worst <= 1e-6
    assert _line("8", ok, f"max covariance d_T over 100 steps: {worst:.2e}")
