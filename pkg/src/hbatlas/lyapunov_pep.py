"""Automated search for quadratic-plus-linear Lyapunov certificates.

We look for V_t = ell_1 (f(x_t) - f*) + ell_2 (f(x_{t-1}) - f*)
+ q(x_{t-1} - x*, grad_{t-1}, x_t - x*, grad_t), with q a homogeneous
quadratic (symmetric 4x4 coefficient matrix over pairwise inner products),
such that for every class function and every heavy-ball trajectory

    (A)  rho V_t - V_{t+1} >= 0        (B)  V_{t+1} - (f(x_{t+1}) - f*) >= 0.

Both are certified over the point set {*, t-1, t, t+1} by pairwise
interpolation multipliers: after substituting the update for x_{t+1}, each
condition minus its weighted residuals must vanish in the function values
(three equality rows) and be positive semidefinite in the Gram basis
(x_{t-1}-x*, x_t-x*, g_{t-1}, g_t, g_{t+1}) -- a 5x5 linear matrix
inequality in 36 unknowns: 2 (ell) + 10 (q) + 12 + 12 multipliers.

The cone program is handed to Clarabel with a margin objective, but solver
output is never trusted: any candidate is re-verified from scratch by
eigenvalue and residual checks (verify_certificate), and only verified
certificates are reported as Lyapunov evidence.  A decisively negative
margin reports infeasibility; everything else is indeterminate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import clarabel
import numpy as np
import scipy.sparse as sp

from .core import ClassParams, IndeterminateError, Tuning
from .quadratic_rate import rate_over_class
from .serialize import dumps_17g

VERIFY_TOL = 1e-8
MARGIN_INFEAS = -1e-7   # solved margin at or below this is decisive
_MARGIN_CAP = 1.0

_SQRT2 = np.sqrt(2.0)

# point labels and the fixed ordering of the 12 ordered pairs
_POINTS = ("star", "tm1", "t", "tp1")
PAIRS = tuple((i, j) for i in _POINTS for j in _POINTS if i != j)

# upper-triangle (row-major) index pairs of the 4x4 Lyapunov coefficient Q
_Q_INDEX = tuple((r, cc) for r in range(4) for cc in range(r, 4))


def _svec(m: np.ndarray) -> np.ndarray:
    """Scaled column-major upper-triangle vectorization (Clarabel's order);
    preserves Frobenius inner products."""
    n = m.shape[0]
    out = np.empty(n * (n + 1) // 2)
    k = 0
    for c in range(n):
        for r in range(c + 1):
            out[k] = m[r, c] * (1.0 if r == c else _SQRT2)
            k += 1
    return out


def _unsvec(v: np.ndarray, n: int) -> np.ndarray:
    m = np.zeros((n, n))
    k = 0
    for c in range(n):
        for r in range(c + 1):
            val = v[k] / (1.0 if r == c else _SQRT2)
            m[r, c] = val
            m[c, r] = val
            k += 1
    return m


def _sym_outer(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 0.5 * (np.outer(u, v) + np.outer(v, u))


def _basis_vectors(t: Tuning):
    """Coordinates of all points/gradients in the 5-vector Gram basis."""
    e = np.eye(5)
    x = {
        "star": np.zeros(5),
        "tm1": e[0],
        "t": e[1],
        "tp1": (1.0 + t.beta) * e[1] - t.beta * e[0] - t.gamma * e[3],
    }
    g = {"star": np.zeros(5), "tm1": e[2], "t": e[3], "tp1": e[4]}
    return x, g


def _pair_matrices(t: Tuning, c: ClassParams):
    """Gram matrices M and f-coefficients phi with r_ij = phi.f - <M, B>."""
    x, g = _basis_vectors(t)
    coef = 1.0 / (2.0 * (1.0 - c.mu / c.L))
    fidx = {"tm1": 0, "t": 1, "tp1": 2}
    mats, phis = [], []
    for (i, j) in PAIRS:
        dx = x[i] - x[j]
        dg = g[i] - g[j]
        m = _sym_outer(g[j], dx) + coef * (
            np.outer(dg, dg) / c.L
            + c.mu * np.outer(dx, dx)
            - (2.0 * c.mu / c.L) * _sym_outer(dg, dx)
        )
        phi = np.zeros(3)
        if i != "star":
            phi[fidx[i]] += 1.0
        if j != "star":
            phi[fidx[j]] -= 1.0
        mats.append(m)
        phis.append(phi)
    return mats, phis


def _q_embeddings(t: Tuning):
    """Linear maps svec4(Q) -> svec5 of the V_t and V_{t+1} quadratics."""
    x, g = _basis_vectors(t)
    u_t = np.stack([x["tm1"], g["tm1"], x["t"], g["t"]], axis=1)
    u_tp = np.stack([x["t"], g["t"], x["tp1"], g["tp1"]], axis=1)

    def embed(u):
        cols = []
        for (r, cc) in _Q_INDEX:
            q = np.zeros((4, 4))
            q[r, cc] = q[cc, r] = 1.0
            cols.append(_svec(u @ q @ u.T))
        return np.stack(cols, axis=1)  # 15 x 10

    return embed(u_t), embed(u_tp)


@dataclass
class LmiProblem:
    """Affine data of the two 5x5 blocks and the f-value equality rows.

    block_a(z) = sa @ z and block_b(z) = sb @ z (svec form) must be PSD;
    ea @ z = 0 and eb @ z = rhs_b are the f-coefficient equalities; the 24
    multiplier entries of z (layout: ell 0:2, Q 2:12, lambda 12:24,
    nu 24:36) are sign-constrained nonnegative.
    """

    sa: np.ndarray
    sb: np.ndarray
    ea: np.ndarray
    eb: np.ndarray
    rhs_b: np.ndarray
    tuning: Tuning
    class_params: ClassParams
    rho: float


def build_lmi(t: Tuning, c: ClassParams, rho: float) -> LmiProblem:
    """Assemble the certificate system for the decrease factor rho."""
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    mats, phis = _pair_matrices(t, c)
    m = np.stack([_svec(x) for x in mats], axis=1)      # 15 x 12
    phi = np.stack(phis, axis=1)                        # 3 x 12
    t_t, t_tp = _q_embeddings(t)

    # f-coefficients of V_t (rows f_{t-1}, f_t, f_{t+1}; columns ell_1, ell_2)
    l_t = np.zeros((3, 2))
    l_t[1, 0] = 1.0
    l_t[0, 1] = 1.0
    l_tp = np.zeros((3, 2))
    l_tp[2, 0] = 1.0
    l_tp[1, 1] = 1.0

    sa = np.zeros((15, 36))
    sa[:, 2:12] = rho * t_t - t_tp
    sa[:, 12:24] = m
    sb = np.zeros((15, 36))
    sb[:, 2:12] = t_tp
    sb[:, 24:36] = m
    ea = np.zeros((3, 36))
    ea[:, 0:2] = rho * l_t - l_tp
    ea[:, 12:24] = -phi
    eb = np.zeros((3, 36))
    eb[:, 0:2] = l_tp
    eb[:, 24:36] = -phi
    rhs_b = np.array([0.0, 0.0, 1.0])  # ... = coefficient of f_{t+1}
    return LmiProblem(sa, sb, ea, eb, rhs_b, t, c, rho)


@dataclass(frozen=True)
class LyapunovCertificate:
    """Verified data of a Lyapunov certificate at contraction factor rho."""

    ell: np.ndarray        # (2,)
    q: np.ndarray          # (4, 4) symmetric
    lam: np.ndarray        # (12,) decrease multipliers, ordered as PAIRS
    nu: np.ndarray         # (12,) sandwich multipliers
    rho: float
    tuning: Tuning
    class_params: ClassParams
    min_eig_a: float
    min_eig_b: float

    def to_vector(self) -> np.ndarray:
        z = np.empty(36)
        z[0:2] = self.ell
        z[2:12] = [self.q[r, cc] for (r, cc) in _Q_INDEX]
        z[12:24] = self.lam
        z[24:36] = self.nu
        return z

    def to_json(self) -> str:
        return dumps_17g({
            "ell": self.ell.tolist(),
            "Q": [self.q[r, cc] for (r, cc) in _Q_INDEX],
            "lambda": self.lam.tolist(),
            "nu": self.nu.tolist(),
            "rho": self.rho,
            "tuning": {"gamma": self.tuning.gamma, "beta": self.tuning.beta},
            "class": {"mu": self.class_params.mu, "L": self.class_params.L},
            "min_eig_A": self.min_eig_a,
            "min_eig_B": self.min_eig_b,
        })

    @staticmethod
    def from_json(text: str) -> "LyapunovCertificate":
        d = json.loads(text)
        q = np.zeros((4, 4))
        for val, (r, cc) in zip(d["Q"], _Q_INDEX):
            q[r, cc] = q[cc, r] = float(val)
        return LyapunovCertificate(
            ell=np.asarray(d["ell"], dtype=float),
            q=q,
            lam=np.asarray(d["lambda"], dtype=float),
            nu=np.asarray(d["nu"], dtype=float),
            rho=float(d["rho"]),
            tuning=Tuning(float(d["tuning"]["gamma"]),
                          float(d["tuning"]["beta"])),
            class_params=ClassParams(float(d["class"]["mu"]),
                                     float(d["class"]["L"])),
            min_eig_a=float(d["min_eig_A"]),
            min_eig_b=float(d["min_eig_B"]),
        )


def _vector_to_cert(z: np.ndarray, p: LmiProblem) -> LyapunovCertificate:
    q = np.zeros((4, 4))
    for val, (r, cc) in zip(z[2:12], _Q_INDEX):
        q[r, cc] = q[cc, r] = val
    ea = float(np.linalg.eigvalsh(_unsvec(p.sa @ z, 5)).min())
    eb = float(np.linalg.eigvalsh(_unsvec(p.sb @ z, 5)).min())
    return LyapunovCertificate(
        ell=z[0:2].copy(), q=q, lam=z[12:24].copy(), nu=z[24:36].copy(),
        rho=p.rho, tuning=p.tuning, class_params=p.class_params,
        min_eig_a=ea, min_eig_b=eb,
    )


def verify_certificate(cert: LyapunovCertificate, t: Tuning, c: ClassParams,
                       tol: float = VERIFY_TOL) -> bool:
    """Recompute both certificate matrices from scratch and check them.

    Passes iff the minimum eigenvalue of each block is >= -tol, every
    f-coefficient equality residual is <= tol, and every multiplier is
    >= -tol.  Independent of whatever solver produced the certificate.
    """
    p = build_lmi(t, c, cert.rho)
    z = cert.to_vector()
    if float(np.min(z[12:36])) < -tol:
        return False
    if float(np.max(np.abs(p.ea @ z))) > tol:
        return False
    if float(np.max(np.abs(p.eb @ z - p.rhs_b))) > tol:
        return False
    eig_a = float(np.linalg.eigvalsh(_unsvec(p.sa @ z, 5)).min())
    eig_b = float(np.linalg.eigvalsh(_unsvec(p.sb @ z, 5)).min())
    return eig_a >= -tol and eig_b >= -tol


_SETTINGS = None


def _solver_settings():
    global _SETTINGS
    if _SETTINGS is None:
        s = clarabel.DefaultSettings()
        s.verbose = False
        _SETTINGS = s
    return _SETTINGS


def sdp_feasible(p: LmiProblem, tol: float = VERIFY_TOL
                 ) -> LyapunovCertificate | None:
    """Search the LMI for a certificate; None means decisively infeasible.

    A margin variable s is maximized subject to block_a >= s*I,
    block_b >= s*I, multipliers >= s (capped at 1): many genuine
    certificates are exactly marginal (the classical descent certificate
    has an identically-zero sandwich block), so feasibility is decided by
    independently verifying the candidate, not by the sign of s.  The
    margin only serves to center the candidate and, when clearly negative,
    to certify infeasibility.  Solver failure raises IndeterminateError.
    """
    nv = 37
    cost = np.zeros(nv)
    cost[36] = -1.0

    a_eq = np.zeros((6, nv))
    a_eq[0:3, :36] = p.ea
    a_eq[3:6, :36] = p.eb
    b_eq = np.concatenate([np.zeros(3), p.rhs_b])

    a_nn = np.zeros((25, nv))
    a_nn[:24, 12:36] = -np.eye(24)
    a_nn[:24, 36] = 1.0          # s - multiplier <= 0
    a_nn[24, 36] = 1.0           # s <= cap
    b_nn = np.concatenate([np.zeros(24), [_MARGIN_CAP]])

    svec_eye = _svec(np.eye(5))
    a_pa = np.zeros((15, nv))
    a_pa[:, :36] = -p.sa
    a_pa[:, 36] = svec_eye
    a_pb = np.zeros((15, nv))
    a_pb[:, :36] = -p.sb
    a_pb[:, 36] = svec_eye

    a = sp.csc_matrix(np.vstack([a_eq, a_nn, a_pa, a_pb]))
    b = np.concatenate([b_eq, b_nn, np.zeros(30)])
    cones = [
        clarabel.ZeroConeT(6),
        clarabel.NonnegativeConeT(25),
        clarabel.PSDTriangleConeT(5),
        clarabel.PSDTriangleConeT(5),
    ]
    solver = clarabel.DefaultSolver(sp.csc_matrix((nv, nv)), cost, a, b,
                                    cones, _solver_settings())
    sol = solver.solve()
    status = str(sol.status)
    solved = status in ("Solved", "AlmostSolved",
                        "SolverStatus.Solved", "SolverStatus.AlmostSolved")
    if not solved:
        raise IndeterminateError(f"cone solver terminated with {status}")

    z = np.asarray(sol.x)[:36]
    margin = float(np.asarray(sol.x)[36])
    cert = _vector_to_cert(z, p)
    if verify_certificate(cert, p.tuning, p.class_params, tol):
        return cert
    if margin <= MARGIN_INFEAS:
        return None
    raise IndeterminateError(
        f"margin {margin:.3e} inside the tolerance band and candidate "
        "failed verification"
    )


def lyapunov_feasible(t: Tuning, c: ClassParams, rho: float = 1.0,
                      tol: float = VERIFY_TOL) -> LyapunovCertificate | None:
    """Convenience wrapper: build the LMI at (t, c, rho) and search it.

    Tunings whose quadratic rate already exceeds 1 cannot admit a
    certificate at rho <= 1 (quadratics belong to the class), so the cone
    solve is skipped there.
    """
    if rho >= 1.0 and rate_over_class(t, c) > 1.0 + 1e-12:
        return None
    return sdp_feasible(build_lmi(t, c, rho), tol)


def best_rate(t: Tuning, c: ClassParams, tol_rho: float = 1e-3
              ) -> float | None:
    """Smallest certified contraction factor, by bisection over rho.

    The quadratic-class rate lower-bounds every valid worst-case rate, so
    it brackets the bisection from below.  Returns None when no certificate
    exists at rho = 1.  An undecided solve at rho = 1 propagates; undecided
    inner solves are treated as infeasible (the returned rate stays a
    verified upper bound).
    """
    if tol_rho <= 0.0:
        raise ValueError("tol_rho must be positive")
    lo = min(rate_over_class(t, c), 1.0)
    if lyapunov_feasible(t, c, 1.0) is None:
        return None
    hi = 1.0
    while hi - lo > tol_rho:
        mid = 0.5 * (lo + hi)
        if mid <= 0.0:
            break
        try:
            feasible = lyapunov_feasible(t, c, mid) is not None
        except IndeterminateError:
            feasible = False
        if feasible:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Randomized soundness oracle: evaluate a certificate on concrete class
# instances (data a certificate's inequalities must dominate).


def _certificate_margins(cert, x_prev, g_prev, f_prev, x_cur, g_cur, f_cur,
                         x_next, g_next, f_next, x_star, f_star):
    """Pointwise slack of (A) and (B) on a batch of instances.

    All point arguments are (n, d) arrays; f arguments are (n,).
    Returns (rho V_t - V_{t+1}, V_{t+1} - (f_next - f_star)).
    """
    def vfun(xp, gp, fp, xc, gc, fc):
        vecs = np.stack([xp - x_star, gp, xc - x_star, gc], axis=1)  # n,4,d
        gram = np.einsum("nad,nbd->nab", vecs, vecs)
        quad = np.einsum("ab,nab->n", cert.q, gram)
        return cert.ell[0] * (fc - f_star) + cert.ell[1] * (fp - f_star) + quad

    v_t = vfun(x_prev, g_prev, f_prev, x_cur, g_cur, f_cur)
    v_tp = vfun(x_cur, g_cur, f_cur, x_next, g_next, f_next)
    return cert.rho * v_t - v_tp, v_tp - (f_next - f_star)


def _quadratic_batch(rng, c: ClassParams, t: Tuning, n: int, d: int):
    """HB data from random quadratics with spectrum inside [mu, L]."""
    lam = rng.uniform(c.mu, c.L, size=(n, d))
    # push some eigenvalues to the exact endpoints to probe tightness
    lam[rng.random((n, d)) < 0.15] = c.mu
    lam[rng.random((n, d)) < 0.15] = c.L
    qmats = rng.standard_normal((n, d, d))
    u, _ = np.linalg.qr(qmats)
    p = np.einsum("nij,nj,nkj->nik", u, lam, u)
    x_star = rng.standard_normal((n, d))
    x_prev = x_star + rng.standard_normal((n, d))
    x_cur = x_star + rng.standard_normal((n, d))

    def grad(x):
        return np.einsum("nij,nj->ni", p, x - x_star)

    def val(x):
        return 0.5 * np.einsum("ni,ni->n", x - x_star, grad(x))

    g_cur = grad(x_cur)
    x_next = x_cur - t.gamma * g_cur + t.beta * (x_cur - x_prev)
    return (x_prev, grad(x_prev), val(x_prev),
            x_cur, g_cur, val(x_cur),
            x_next, grad(x_next), val(x_next),
            x_star, np.zeros(n))


def _softplus_batch(rng, c: ClassParams, t: Tuning, n: int):
    """1-D non-quadratic instances: mu-quadratic plus softplus bumps."""
    n_bumps = 3
    a = rng.uniform(-1.5, 1.5, size=n)
    alpha = rng.uniform(0.5, 4.0, size=(n, n_bumps))
    b = rng.uniform(-2.0, 2.0, size=(n, n_bumps))
    w = rng.dirichlet(np.ones(n_bumps), size=n) * rng.uniform(
        0.3, 1.0, size=(n, 1))
    coef = w * 4.0 * (c.L - c.mu) / (alpha ** 2)  # total curvature <= L - mu

    def sig(u):
        return 0.5 * (1.0 + np.tanh(0.5 * u))

    def grad(x):
        u = alpha * (x[:, None] - b)
        return c.mu * (x - a) + np.sum(coef * alpha * sig(u), axis=1)

    def val(x):
        u = alpha * (x[:, None] - b)
        soft = np.logaddexp(0.0, u)
        return 0.5 * c.mu * (x - a) ** 2 + np.sum(coef * soft, axis=1)

    # the gradient is strictly increasing: bisect for the minimizer
    lo = np.full(n, -60.0)
    hi = np.full(n, 60.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = grad(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    x_star = 0.5 * (lo + hi)
    f_star = val(x_star)

    x_prev = x_star + rng.standard_normal(n)
    x_cur = x_star + rng.standard_normal(n)
    g_cur = grad(x_cur)
    x_next = x_cur - t.gamma * g_cur + t.beta * (x_cur - x_prev)
    one = lambda v: v[:, None]
    return (one(x_prev), one(grad(x_prev)), val(x_prev),
            one(x_cur), one(g_cur), val(x_cur),
            one(x_next), one(grad(x_next)), val(x_next),
            one(x_star), f_star)


def mc_certificate_check(cert: LyapunovCertificate, n_samples: int,
                         seed: int, dims=(1, 2, 3)) -> float:
    """Worst (most negative) certificate slack over random class instances.

    Samples quadratic instances in the requested dimensions plus a 1-D
    softplus family, runs one heavy-ball step on each, and evaluates both
    certificate inequalities.  A verified certificate must come back
    >= -1e-7 here; this is the builder's independent soundness oracle.
    """
    rng = np.random.default_rng(seed)
    t, c = cert.tuning, cert.class_params
    groups = len(dims) + 1
    per = max(n_samples // groups, 1)
    worst = np.inf
    for d in dims:
        batch = _quadratic_batch(rng, c, t, per, d)
        m_a, m_b = _certificate_margins(cert, *batch)
        worst = min(worst, float(m_a.min()), float(m_b.min()))
    batch = _softplus_batch(rng, c, t, per)
    m_a, m_b = _certificate_margins(cert, *batch)
    worst = min(worst, float(m_a.min()), float(m_b.min()))
    return worst
