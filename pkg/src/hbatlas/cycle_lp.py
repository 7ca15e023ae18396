"""Dimension-1 cycle search for heavy-ball via linear feasibility.

A K-tuple X is a cycle of the tuning (gamma, beta) iff the gradients
forced by the recursion,

    G = [(1 + beta) I - J - beta J^{-1}] X / gamma,

(J the cyclic shift) are realizable by a class function, which in one
dimension reduces to every consecutive sorted secant slope lying in
[mu, L].  Fixing the sort permutation sigma turns the question into a
small LP; enumerating permutations (after symmetry reduction) decides
cycle existence exactly.

Conventions fixed once here:
  * sigma maps the time index to the sorted rank: x_t = xtilde[sigma[t]].
  * time 0 holds the smallest point (sigma[0] == 0); cyclic relabeling
    makes this lossless.
  * reflection sigma -> K-1-sigma (recanonicalized) preserves feasibility,
    so only one representative per reflection pair is enumerated;
    self-symmetric permutations (even K) are retained once.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ClassParams, IndeterminateError, Tuning, _step_scalar
from .lp import LpProblem, LpResult, LpStatus, maximize_margin, solve_lp
from .serialize import dumps_17g

MIN_GAP = 1e-7          # certificates with thinner sorted gaps are rejected
SLOPE_TOL = 1e-9
FULL_ENUM_KMAX = 9      # (K-1)! permutations; past this the search explodes

# Cycle points are translated to sit in [c, c+1] before gradient
# calibration so every landing target lives on a uniform ulp grid.
_CALIBRATION_OFFSETS = (4.0, 8.0, 32.0, 128.0)


@dataclass(frozen=True)
class Permutation:
    """Time-to-rank images of a sort permutation, canonical (images[0]=0)."""

    images: tuple[int, ...]

    def __post_init__(self):
        k = len(self.images)
        if sorted(self.images) != list(range(k)):
            raise ValueError(f"not a permutation of 0..{k - 1}: {self.images}")
        if self.images[0] != 0:
            raise ValueError("canonical form requires sigma(0) = 0")

    def __len__(self) -> int:
        return len(self.images)

    def time_of_rank(self) -> np.ndarray:
        """Inverse map: which time index occupies each sorted rank."""
        inv = np.empty(len(self.images), dtype=int)
        for t, r in enumerate(self.images):
            inv[r] = t
        return inv

    def reflected(self) -> "Permutation":
        """Mirror the ranks and cyclically relabel time back to canonical."""
        k = len(self.images)
        mirrored = tuple(k - 1 - r for r in self.images)
        t0 = mirrored.index(0)
        return Permutation(tuple(mirrored[(t0 + s) % k] for s in range(k)))


def conjectured_permutation(k: int) -> Permutation:
    """The zigzag ordering: time-ordered ranks 0, 1, 3, 5, ..., 4, 2."""
    if k < 3:
        raise ValueError("cycles need K >= 3")
    half = (k - 1 + 1) // 2
    ranks = [0]
    ranks += [2 * t - 1 for t in range(1, half + 1)]
    ranks += [2 * (k - t) for t in range(half + 1, k)]
    return Permutation(tuple(ranks))


@lru_cache(maxsize=None)
def _reduced_images(k: int) -> tuple[tuple[int, ...], ...]:
    seen: set[tuple[int, ...]] = set()
    out = []
    for rest in itertools.permutations(range(1, k)):
        images = (0,) + rest
        if images in seen:
            continue
        refl = Permutation(images).reflected().images
        seen.add(images)
        seen.add(refl)
        out.append(min(images, refl))
    return tuple(sorted(out))


def reduced_permutations(k: int) -> list[Permutation]:
    """All canonical permutations modulo reflection, one per pair."""
    if not 3 <= k <= FULL_ENUM_KMAX:
        raise ValueError(
            f"full enumeration supported for 3 <= K <= {FULL_ENUM_KMAX}"
        )
    return [Permutation(im) for im in _reduced_images(k)]


def circulant_matrix(t: Tuning, k: int) -> np.ndarray:
    c = np.zeros((k, k))
    idx = np.arange(k)
    c[idx, idx] = (1.0 + t.beta) / t.gamma
    c[idx, (idx + 1) % k] = -1.0 / t.gamma
    c[idx, (idx - 1) % k] = -t.beta / t.gamma
    return c


def circulant_gradient(X, t: Tuning) -> np.ndarray:
    """Gradients forced by the cycle condition:
    G_i = ((1+beta) X_i - X_{i+1} - beta X_{i-1}) / gamma."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 3:
        raise ValueError("cycles need K >= 3")
    return circulant_matrix(t, X.shape[0]) @ X


def build_lp(t: Tuning, c: ClassParams, k: int, sigma: Permutation) -> LpProblem:
    """The feasibility program of a K-cycle under the sort permutation sigma.

    Variables X in R^K.  With xt = sorted X, gt = correspondingly permuted
    circulant gradients, the rows are, for each consecutive rank pair i:

        gap_i = xt[i+1] - xt[i] >= 0
        mu * gap_i <= gt[i+1] - gt[i] <= L * gap_i

    plus the degeneracy-excluding normalization xt[0] = 0, xt[K-1] = 1
    (the homogeneous system always admits X = 0).
    """
    if k < 3:
        raise ValueError("cycles need K >= 3")
    if len(sigma) != k:
        raise ValueError("permutation length disagrees with K")
    cmat = circulant_matrix(t, k)
    tor = sigma.time_of_rank()
    a_ub, b_ub = [], []
    for i in range(k - 1):
        d = np.zeros(k)
        d[tor[i + 1]] += 1.0
        d[tor[i]] -= 1.0
        dg = cmat[tor[i + 1]] - cmat[tor[i]]
        a_ub.append(-d)
        a_ub.append(c.mu * d - dg)
        a_ub.append(dg - c.L * d)
        b_ub.extend([0.0, 0.0, 0.0])
    a_eq = np.zeros((2, k))
    a_eq[0, tor[0]] = 1.0
    a_eq[1, tor[-1]] = 1.0
    return LpProblem(np.asarray(a_ub), np.asarray(b_ub), a_eq,
                     np.asarray([0.0, 1.0]))


@dataclass(frozen=True)
class CycleCertificate:
    """A verifiable witness that HB_{gamma,beta} cycles on the class.

    X holds the time-ordered iterates, G the gradients; the circulant
    identity binds them to 1e-12 relative, sorted slopes lie in [mu, L],
    the sorted spread is 1, and the minimal period is exactly K.
    """

    k: int
    sigma: Permutation
    X: np.ndarray
    G: np.ndarray
    tuning: Tuning
    class_params: ClassParams
    min_gap: float

    def to_json(self) -> str:
        return dumps_17g({
            "K": self.k,
            "sigma": list(self.sigma.images),
            "X": self.X.tolist(),
            "G": self.G.tolist(),
            "gamma": self.tuning.gamma,
            "beta": self.tuning.beta,
            "mu": self.class_params.mu,
            "L": self.class_params.L,
            "min_gap": self.min_gap,
        })

    @staticmethod
    def from_json(text: str) -> "CycleCertificate":
        d = json.loads(text)
        return CycleCertificate(
            k=int(d["K"]),
            sigma=Permutation(tuple(int(i) for i in d["sigma"])),
            X=np.asarray(d["X"], dtype=float),
            G=np.asarray(d["G"], dtype=float),
            tuning=Tuning(float(d["gamma"]), float(d["beta"])),
            class_params=ClassParams(float(d["mu"]), float(d["L"])),
            min_gap=float(d["min_gap"]),
        )


def check_certificate(cert: CycleCertificate) -> list[str]:
    """Re-derive every invariant; returns the list of violations (empty = ok)."""
    problems = []
    k = cert.k
    if len(cert.X) != k or len(cert.G) != k:
        return ["length mismatch"]
    g_ref = circulant_gradient(cert.X, cert.tuning)
    scale = max(np.max(np.abs(g_ref)), 1e-300)
    if np.max(np.abs(cert.G - g_ref)) > 1e-12 * scale:
        problems.append("gradients violate the circulant identity")
    order = np.argsort(cert.X, kind="stable")
    if not np.array_equal(order, cert.sigma.time_of_rank()):
        problems.append("sigma does not sort X")
    xs, gs = cert.X[order], cert.G[order]
    gaps = np.diff(xs)
    if gaps.min() <= MIN_GAP:
        problems.append(f"sorted gap {gaps.min()} below the distinctness floor")
    if abs((xs[-1] - xs[0]) - 1.0) > 1e-9:
        problems.append("sorted spread is not normalized to 1")
    slopes = np.diff(gs) / gaps
    mu, L = cert.class_params.mu, cert.class_params.L
    if slopes.min() < mu - SLOPE_TOL or slopes.max() > L + SLOPE_TOL:
        problems.append("sorted slope outside [mu, L]")
    for d in range(1, k):
        if k % d == 0 and np.max(np.abs(cert.X - np.roll(cert.X, d))) <= MIN_GAP:
            problems.append(f"X is {d}-periodic: not a minimal K-cycle")
    return problems


def _calibrate_gradients(X: np.ndarray, t: Tuning) -> np.ndarray | None:
    """Nudge G within a few ulps so each float HB step lands exactly.

    The LP witness is only float-accurate, and the emitted cycles are
    typically linearly unstable, so raw rounding noise in G would be
    amplified geometrically during replay.  Walking each gradient to the
    float that makes _step_scalar hit the next iterate bit-exactly keeps
    the replayed trajectory exactly periodic forever.  The adjustment is
    ~1e-15 relative, far inside the 1e-12 circulant tolerance.
    """
    k = X.shape[0]
    G = circulant_gradient(X, t)
    for i in range(k):
        target = X[(i + 1) % k]
        x_prev, x_cur = X[i - 1], X[i]
        g = G[i]
        hit = False
        for _ in range(4):  # Newton jumps: d(step)/dg = -gamma exactly
            r = _step_scalar(x_prev, x_cur, g, t.gamma, t.beta)
            if r == target:
                hit = True
                break
            g = g + (r - target) / t.gamma
        if not hit:
            for k_ulp in range(1, 65):  # local scan around the Newton point
                for gc in (
                    _nudge(g, k_ulp), _nudge(g, -k_ulp),
                ):
                    if _step_scalar(x_prev, x_cur, gc, t.gamma,
                                    t.beta) == target:
                        g = gc
                        hit = True
                        break
                if hit:
                    break
        if not hit:
            return None
        G[i] = g
    return G


def _nudge(x: float, ulps: int) -> float:
    toward = np.inf if ulps > 0 else -np.inf
    for _ in range(abs(ulps)):
        x = np.nextafter(x, toward)
    return x


def _extract_certificate(t: Tuning, c: ClassParams, k: int,
                         sigma: Permutation) -> CycleCertificate | None:
    """Pull a well-centered, replay-exact certificate out of a feasible LP."""
    prob = build_lp(t, c, k, sigma)
    x_raw, margin = maximize_margin(prob)
    if x_raw is None or margin is None or margin <= MIN_GAP:
        return None
    for offset in _CALIBRATION_OFFSETS:
        X = x_raw + (offset - x_raw.min())
        G = _calibrate_gradients(X, t)
        if G is None:
            continue
        order = np.argsort(X, kind="stable")
        gaps = np.diff(X[order])
        slopes = np.diff(G[order]) / gaps
        if gaps.min() <= MIN_GAP:
            return None
        if slopes.min() < c.mu - SLOPE_TOL or slopes.max() > c.L + SLOPE_TOL:
            continue
        cert = CycleCertificate(k, sigma, X, G, t, c, float(gaps.min()))
        if check_certificate(cert):
            continue
        return cert
    return None


def lp_feasible_sigma(t: Tuning, c: ClassParams, k: int, sigma: Permutation,
                      tol_feas: float = None, tol_infeas: float = None
                      ) -> CycleCertificate | None:
    """Decide the cycle program at (K, sigma) and emit a certificate.

    Returns None when the program is infeasible, or when the feasible set
    only contains degenerate witnesses (sorted gaps at or below MIN_GAP:
    those are cycles of a shorter effective length and are picked up at
    the appropriate K).  Raises IndeterminateError when the solver lands
    in the tolerance band.
    """
    kw = {}
    if tol_feas is not None:
        kw["tol_feas"] = tol_feas
    if tol_infeas is not None:
        kw["tol_infeas"] = tol_infeas
    res = solve_lp(build_lp(t, c, k, sigma), **kw)
    if res.status is LpStatus.INFEASIBLE:
        return None
    if res.status is LpStatus.INDETERMINATE:
        raise IndeterminateError(
            f"cycle LP undecided at K={k}, sigma={sigma.images}: {res.detail}"
        )
    return _extract_certificate(t, c, k, sigma)


def _ordered_perms(k: int, mode: str) -> list[Permutation]:
    conj = conjectured_permutation(k)
    if mode == "conjectured":
        return [conj]
    rest = [p for p in reduced_permutations(k) if p.images != conj.images]
    return [conj] + rest


def cycle_exists_dim1(t: Tuning, c: ClassParams, kmax: int,
                      mode: str = "conjectured", tol_feas: float = None,
                      tol_infeas: float = None) -> CycleCertificate | None:
    """Smallest-K cycle certificate, or None if no length up to kmax works.

    mode "conjectured" tries only the zigzag permutation per K; "full"
    enumerates all reduced permutations (zigzag first, then lexicographic),
    which is capped at K <= 9.  If some LP was undecided and nothing
    feasible was found, the overall answer is undecided too.
    """
    if mode not in ("conjectured", "full"):
        raise ValueError(f"unknown search mode {mode!r}")
    if kmax < 3:
        raise ValueError("kmax must be >= 3")
    if mode == "full" and kmax > FULL_ENUM_KMAX:
        raise ValueError(f"full enumeration capped at K <= {FULL_ENUM_KMAX}")
    saw_indeterminate = False
    for k in range(3, kmax + 1):
        for sigma in _ordered_perms(k, mode):
            try:
                cert = lp_feasible_sigma(t, c, k, sigma, tol_feas, tol_infeas)
            except IndeterminateError:
                saw_indeterminate = True
                continue
            if cert is not None:
                return cert
    if saw_indeterminate:
        raise IndeterminateError(
            f"no cycle found up to K={kmax} but some solves were undecided"
        )
    return None


def replay_error(cert: CycleCertificate, periods: int = 100) -> float:
    """Max per-period drift |x_{t+K} - x_t| of the replayed trajectory.

    Reconstructs the 1-D function from the certificate data and runs the
    plain float iteration from (x_0, x_1) for `periods` cycles.
    """
    from .core import reconstruct_function_1d, simulate_hb

    model = reconstruct_function_1d(cert.X, cert.G, cert.class_params)
    k = cert.k
    traj = simulate_hb(model, cert.X[0], cert.X[1], cert.tuning, periods * k)
    if traj.shape[0] < periods * k + 2:
        return float("inf")  # overflowed: certainly not periodic
    return float(np.max(np.abs(traj[k:] - traj[:-k])))


def verify_cycle_certificate(cert: CycleCertificate, periods: int = 100,
                             replay_tol: float = 1e-9) -> list[str]:
    """Full verification: invariants, reconstruction, and replay."""
    from .core import NotInClassError, InconsistentDataError, \
        reconstruct_function_1d

    problems = check_certificate(cert)
    try:
        reconstruct_function_1d(cert.X, cert.G, cert.class_params)
    except (NotInClassError, InconsistentDataError, ValueError) as exc:
        problems.append(f"reconstruction failed: {exc}")
        return problems
    err = replay_error(cert, periods)
    if not err <= replay_tol:
        problems.append(
            f"replay drift {err} exceeds {replay_tol} over {periods} periods"
        )
    return problems


def sigma_feasible_strict(t: Tuning, c: ClassParams, k: int,
                          sigma: Permutation) -> bool:
    """Genuine-cycle feasibility at (K, sigma): distinct sorted points.

    The non-strict program admits degenerate witnesses with coincident
    sorted points (effectively shorter cycles wearing the wrong
    permutation), so the per-permutation regions are defined by the same
    distinctness floor certificates use: the largest achievable minimum
    slack must exceed MIN_GAP.
    """
    _, margin = maximize_margin(build_lp(t, c, k, sigma))
    return margin is not None and margin > MIN_GAP


def feasibility_census(t: Tuning, c: ClassParams, k: int
                       ) -> dict[tuple[int, ...], bool]:
    """Strict feasibility of every reduced permutation at one tuning."""
    return {sigma.images: sigma_feasible_strict(t, c, k, sigma)
            for sigma in reduced_permutations(k)}
