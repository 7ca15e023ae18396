import numpy as np
import pytest

from hbatlas import (ClassParams, DataPoint, IndeterminateError,
                     LyapunovCertificate, Tuning, best_rate, build_lmi,
                     interp_residual, lyapunov_feasible, mc_certificate_check,
                     rate_over_class, reconstruct_function_1d, sdp_feasible,
                     verify_certificate)
from hbatlas.lyapunov_pep import PAIRS, _Q_INDEX, _unsvec

C10 = ClassParams(1.0, 10.0)
GREEN10 = Tuning(0.1, 0.0)


class TestBuildLmi:
    def test_unknown_and_block_counts(self):
        p = build_lmi(GREEN10, C10, 1.0)
        # 2 (ell) + 10 (Q) + 12 (lambda) + 12 (nu) unknowns,
        # two 5x5 blocks, three f-equality rows per block
        assert p.sa.shape == (15, 36)
        assert p.sb.shape == (15, 36)
        assert p.ea.shape == (3, 36)
        assert p.eb.shape == (3, 36)
        assert len(PAIRS) == 12

    def test_rho_validation(self):
        with pytest.raises(ValueError):
            build_lmi(GREEN10, C10, 0.0)
        with pytest.raises(ValueError):
            build_lmi(GREEN10, C10, 1.2)

    def test_symbolic_identity_against_direct_evaluation(self):
        # the Gram-matrix encoding must reproduce the defining expression
        # rho V_t - V_{t+1} - sum lambda_ij r_ij for arbitrary data and
        # arbitrary unknowns (not just class-consistent instances)
        rng = np.random.default_rng(0)
        t = Tuning(0.17, 0.23)
        rho = 0.9
        p = build_lmi(t, C10, rho)
        for _ in range(50):
            z = rng.standard_normal(36)
            x_tm1, x_t = rng.standard_normal((2, 5))
            g_tm1, g_t, g_tp1 = rng.standard_normal((3, 5))
            f = rng.standard_normal(3)
            x_tp1 = (1 + t.beta) * x_t - t.beta * x_tm1 - t.gamma * g_t
            pts = {
                "star": DataPoint(np.zeros(5), np.zeros(5), 0.0),
                "tm1": DataPoint(x_tm1, g_tm1, f[0]),
                "t": DataPoint(x_t, g_t, f[1]),
                "tp1": DataPoint(x_tp1, g_tp1, f[2]),
            }
            ell = z[0:2]
            q = np.zeros((4, 4))
            for val, (r, cc) in zip(z[2:12], _Q_INDEX):
                q[r, cc] = q[cc, r] = val

            def vfun(xp, gp, fp, xc, gc, fc):
                vecs = np.stack([xp, gp, xc, gc])
                return ell[0] * fc + ell[1] * fp + float(
                    np.sum(q * (vecs @ vecs.T)))

            v_t = vfun(x_tm1, g_tm1, f[0], x_t, g_t, f[1])
            v_tp = vfun(x_t, g_t, f[1], x_tp1, g_tp1, f[2])
            direct = rho * v_t - v_tp
            for lam_ij, (i, j) in zip(z[12:24], PAIRS):
                direct -= lam_ij * interp_residual(pts[i], pts[j], C10)
            basis = np.stack([x_tm1, x_t, g_tm1, g_t, g_tp1])
            gram = basis @ basis.T
            from_matrix = float(np.sum(_unsvec(p.sa @ z, 5) * gram))
            from_matrix += float((p.ea @ z) @ f)
            assert direct == pytest.approx(from_matrix, abs=1e-9 * max(
                1.0, abs(direct)))

    def test_sandwich_identity_against_direct_evaluation(self):
        rng = np.random.default_rng(1)
        t = Tuning(0.11, -0.31)
        p = build_lmi(t, C10, 1.0)
        for _ in range(50):
            z = rng.standard_normal(36)
            x_tm1, x_t = rng.standard_normal((2, 5))
            g_tm1, g_t, g_tp1 = rng.standard_normal((3, 5))
            f = rng.standard_normal(3)
            x_tp1 = (1 + t.beta) * x_t - t.beta * x_tm1 - t.gamma * g_t
            pts = {
                "star": DataPoint(np.zeros(5), np.zeros(5), 0.0),
                "tm1": DataPoint(x_tm1, g_tm1, f[0]),
                "t": DataPoint(x_t, g_t, f[1]),
                "tp1": DataPoint(x_tp1, g_tp1, f[2]),
            }
            ell = z[0:2]
            q = np.zeros((4, 4))
            for val, (r, cc) in zip(z[2:12], _Q_INDEX):
                q[r, cc] = q[cc, r] = val
            vecs = np.stack([x_t, g_t, x_tp1, g_tp1])
            v_tp = ell[0] * f[2] + ell[1] * f[1] + float(
                np.sum(q * (vecs @ vecs.T)))
            nu = z[24:36]
            direct = v_tp - f[2]
            for nu_ij, (i, j) in zip(nu, PAIRS):
                direct -= nu_ij * interp_residual(pts[i], pts[j], C10)
            basis = np.stack([x_tm1, x_t, g_tm1, g_t, g_tp1])
            gram = basis @ basis.T
            from_matrix = float(np.sum(_unsvec(p.sb @ z, 5) * gram))
            from_matrix += float((p.eb @ z - p.rhs_b) @ f)
            assert direct == pytest.approx(from_matrix, abs=1e-9 * max(
                1.0, abs(direct)))


class TestSolver:
    def test_convergent_gd_step_admits_certificate(self):
        cert = lyapunov_feasible(GREEN10, C10, 1.0)
        assert cert is not None
        assert verify_certificate(cert, GREEN10, C10)
        assert cert.min_eig_a >= -1e-8 and cert.min_eig_b >= -1e-8

    def test_too_long_gd_step_has_no_certificate_and_a_two_cycle(self):
        t = Tuning(2.5 / C10.L, 0.0)
        assert lyapunov_feasible(t, C10, 1.0) is None
        # the explicit 2-cycle: x1 = x0 - gamma g0, g1 = -g0; its secant
        # slope 2/gamma falls inside [mu, L] exactly when gamma > 2/L
        slope = 2.0 / t.gamma
        assert C10.mu <= slope <= C10.L
        model = reconstruct_function_1d([0.0, 1.0],
                                        [-1.0 / t.gamma, 1.0 / t.gamma], C10)
        assert model.gradient(0.0) == -model.gradient(1.0)

    def test_feasible_at_larger_rho(self):
        t = Tuning(0.05, 0.2)
        assert lyapunov_feasible(t, C10, 0.995) is not None
        assert lyapunov_feasible(t, C10, 1.0) is not None

    def test_verify_rejects_negated_multiplier(self):
        cert = lyapunov_feasible(GREEN10, C10, 1.0)
        lam = cert.lam.copy()
        idx = int(np.argmax(lam))
        lam[idx] = -lam[idx] - 1e-3
        bad = LyapunovCertificate(
            ell=cert.ell, q=cert.q, lam=lam, nu=cert.nu, rho=cert.rho,
            tuning=cert.tuning, class_params=cert.class_params,
            min_eig_a=cert.min_eig_a, min_eig_b=cert.min_eig_b)
        assert not verify_certificate(bad, GREEN10, C10)

    def test_json_roundtrip_verifies(self):
        cert = lyapunov_feasible(GREEN10, C10, 1.0)
        other = LyapunovCertificate.from_json(cert.to_json())
        assert verify_certificate(other, GREEN10, C10)

    def test_monte_carlo_soundness(self):
        cert = lyapunov_feasible(GREEN10, C10, 1.0)
        worst = mc_certificate_check(cert, 4000, seed=7)
        assert worst >= -1e-7

    def test_deep_purple_is_decisively_infeasible(self):
        # quadratic rate > 1 short-circuits; force the cone solve by
        # picking an accelerated tuning inside the cycle region
        c = ClassParams(1.0, 25.0)
        t = Tuning(4.0 / 36.0, 4.0 / 9.0)
        assert rate_over_class(t, c) < 1.0
        assert lyapunov_feasible(t, c, 1.0) is None

    def test_unstable_on_quadratics_short_circuits(self):
        t = Tuning(3.9 / C10.L, 0.9)
        assert rate_over_class(t, C10) > 1.0
        assert lyapunov_feasible(t, C10, 1.0) is None


class TestBestRate:
    def test_gd_step_rate_below_one(self):
        rho = best_rate(GREEN10, C10, tol_rho=1e-3)
        assert rho is not None
        assert rho < 1.0

    def test_rate_bracketed_by_quadratic_rate(self):
        rho = best_rate(GREEN10, C10, tol_rho=1e-3)
        assert rho >= rate_over_class(GREEN10, C10) - 1e-3

    def test_monotone_in_tolerance(self):
        coarse = best_rate(GREEN10, C10, tol_rho=2e-2)
        fine = best_rate(GREEN10, C10, tol_rho=2e-3)
        assert fine <= coarse + 2e-3

    def test_none_when_infeasible_at_one(self):
        assert best_rate(Tuning(2.5 / C10.L, 0.0), C10) is None
