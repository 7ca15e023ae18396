"""Dimension-2 cycle feasibility on the K-th roots of unity.

Placing the iterates at the K-th roots of unity fixes every point, and the
cycle condition then fixes every gradient through the circulant identity
applied per coordinate.  Only the K function values remain free, and the
pairwise interpolation inequalities are affine in them, so existence of an
interpolating class function is again a small LP.  The unit radius loses
no generality: the interpolation system is homogeneous under joint scaling
of points, gradients, and value differences.

The minimizer is deliberately not an LP unknown (its position would enter
the inequalities nonlinearly); instead, once the K-point system is
feasible, the centroid is checked as a minimizer: by the cyclic symmetry
an interpolating function can be averaged over rotations, which pins its
minimizer to the origin, and the admissible f* values form an interval
that is intersected and verified explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import ClassParams, DataPoint, Tuning, interp_residual
from .cycle_lp import circulant_matrix
from .lp import LpProblem, LpStatus, solve_lp
from .core import IndeterminateError
from .serialize import dumps_17g

RESIDUAL_TOL = 1e-9


def roots_points(k: int) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(k) / k
    return np.stack([np.cos(th), np.sin(th)], axis=1)


@dataclass(frozen=True)
class RootsCycle:
    """A 2-D cycle certificate on the unit circle."""

    k: int
    points: np.ndarray   # (K, 2), the K-th roots of unity
    grads: np.ndarray    # (K, 2), forced by the circulant identity
    fvals: np.ndarray    # (K,), an interpolable assignment of values
    tuning: Tuning
    class_params: ClassParams

    def to_json(self) -> str:
        return dumps_17g({
            "K": self.k,
            "points": self.points.tolist(),
            "grads": self.grads.tolist(),
            "fvals": self.fvals.tolist(),
            "tuning": {"gamma": self.tuning.gamma, "beta": self.tuning.beta},
            "class": {"mu": self.class_params.mu, "L": self.class_params.L},
        })

    @staticmethod
    def from_json(text: str) -> "RootsCycle":
        d = json.loads(text)
        return RootsCycle(
            k=int(d["K"]),
            points=np.asarray(d["points"], dtype=float),
            grads=np.asarray(d["grads"], dtype=float),
            fvals=np.asarray(d["fvals"], dtype=float),
            tuning=Tuning(float(d["tuning"]["gamma"]),
                          float(d["tuning"]["beta"])),
            class_params=ClassParams(float(d["class"]["mu"]),
                                     float(d["class"]["L"])),
        )


def _pair_offsets(points, grads, c: ClassParams):
    """Constant part of each ordered-pair residual (the f-free terms)."""
    k = points.shape[0]
    coef = 1.0 / (2.0 * (1.0 - c.mu / c.L))
    offs = {}
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            dx = points[i] - points[j]
            dg = grads[i] - grads[j]
            quad = (dg @ dg) / c.L + c.mu * (dx @ dx) \
                - (2.0 * c.mu / c.L) * (dg @ dx)
            offs[(i, j)] = -(grads[j] @ dx) - coef * quad
    return offs


def value_feasibility_lp(t: Tuning, c: ClassParams, k: int) -> LpProblem:
    """LP in the K unknown values: r_ij = f_i - f_j + const_ij >= 0."""
    pts = roots_points(k)
    grads = circulant_matrix(t, k) @ pts
    offs = _pair_offsets(pts, grads, c)
    a_ub, b_ub = [], []
    for (i, j), off in sorted(offs.items()):
        row = np.zeros(k)
        row[i] = -1.0
        row[j] = 1.0
        a_ub.append(row)
        b_ub.append(off)
    a_eq = np.zeros((1, k))
    a_eq[0, 0] = 1.0  # values only matter up to a shift; anchor f_0 = 0
    return LpProblem(np.asarray(a_ub), np.asarray(b_ub), a_eq, np.zeros(1))


def _star_consistent(cycle: RootsCycle, tol: float = RESIDUAL_TOL) -> bool:
    """Check the certificate against the centroid minimizer (x*=0, g*=0).

    The admissible f* interval comes from the 2K residuals that involve
    the star point; a midpoint is then verified against every pair.
    """
    pts = [DataPoint(cycle.points[i], cycle.grads[i], float(cycle.fvals[i]))
           for i in range(cycle.k)]
    c = cycle.class_params
    origin = np.zeros(2)
    # With star = (0, 0, fs) the star residuals are affine in fs:
    #   r(p, star) = f_p - fs - q1(p)                >= 0  ->  fs <= f_p - q1
    #   r(star, p) = fs - f_p + <g_p, x_p> - q1(p)   >= 0  ->  fs >= ...
    # where q1 collects the f-free quadratic terms of the pair (p, star).
    coef = 1.0 / (2.0 * (1.0 - c.mu / c.L))
    lo, hi = -np.inf, np.inf
    for p in pts:
        q1 = coef * ((p.g @ p.g) / c.L + c.mu * (p.x @ p.x)
                     - (2.0 * c.mu / c.L) * (p.g @ p.x))
        hi = min(hi, p.f - q1)
        lo = max(lo, p.f - float(p.g @ p.x) + q1)
    if lo > hi + tol:
        return False
    fs = 0.5 * (lo + hi)
    star = DataPoint(origin, origin, float(fs))
    allpts = pts + [star]
    for i, pi in enumerate(allpts):
        for j, pj in enumerate(allpts):
            if i != j and interp_residual(pi, pj, c) < -tol:
                return False
    return True


def roots_cycle_feasible(t: Tuning, c: ClassParams, k: int
                         ) -> RootsCycle | None:
    """Cycle certificate over the K-th roots of unity, or None."""
    if k < 3:
        raise ValueError("cycles need K >= 3")
    prob = value_feasibility_lp(t, c, k)
    res = solve_lp(prob)
    if res.status is LpStatus.INDETERMINATE:
        raise IndeterminateError(f"roots-of-unity LP undecided at K={k}")
    if res.status is LpStatus.INFEASIBLE:
        return None
    pts = roots_points(k)
    grads = circulant_matrix(t, k) @ pts
    cycle = RootsCycle(k, pts, grads, np.asarray(res.x), t, c)
    if not _star_consistent(cycle):
        return None
    return cycle


def dim2_region(gridspec, c: ClassParams, kmax: int):
    """Per-cell smallest K <= kmax with a roots-of-unity cycle (or None)."""
    from .atlas import RegionGrid

    if kmax > 25:
        raise ValueError("kmax capped at 25")
    cells = []
    for beta in gridspec.betas():
        for gamma in gridspec.gammas():
            t = Tuning(gamma, beta)
            found = None
            for k in range(3, kmax + 1):
                try:
                    if roots_cycle_feasible(t, c, k) is not None:
                        found = k
                        break
                except IndeterminateError:
                    continue
            cells.append(found)
    return RegionGrid(spec=gridspec, class_params=c, cells=cells,
                      provenance={"kind": "dim2_region", "kmax": kmax})
