"""Linear feasibility with an explicit phase-1 infeasibility measure.

Every feasibility question in the package funnels through solve_lp, which
minimizes the total constraint violation (sum of artificial slacks) with
HiGHS and then applies a two-sided tolerance band:

    phase-1 optimum <= tol and point violation <= tol_feas  ->  FEASIBLE
    phase-1 optimum >= tol_infeas                           ->  INFEASIBLE
    anything in between, or solver failure                  ->  INDETERMINATE

The band is what keeps a numerical zero from being silently read as a
strictly positive value (or vice versa): no classification may flip under
a tolerance tightening without passing through INDETERMINATE.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

TOL_FEAS = 1e-9
TOL_INFEAS = 1e-7

_HIGHS_OPTS = dict(
    primal_feasibility_tolerance=1e-10,
    dual_feasibility_tolerance=1e-9,
)


@dataclass
class LpProblem:
    """A pure feasibility system: a_ub x <= b_ub, a_eq x = b_eq."""

    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray

    def __post_init__(self):
        self.a_ub = np.atleast_2d(np.asarray(self.a_ub, dtype=float))
        self.b_ub = np.asarray(self.b_ub, dtype=float)
        self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        if self.a_ub.shape[0] != self.b_ub.shape[0]:
            raise ValueError("inequality rows and bounds disagree")
        if self.a_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("equality rows and bounds disagree")
        if self.a_eq.size and self.a_ub.size \
                and self.a_eq.shape[1] != self.a_ub.shape[1]:
            raise ValueError("row widths disagree")

    @property
    def num_vars(self) -> int:
        return self.a_ub.shape[1] if self.a_ub.size else self.a_eq.shape[1]

    def violation(self, x: np.ndarray) -> float:
        """Max constraint violation at x (0 means feasible)."""
        v = 0.0
        if self.a_ub.size:
            v = max(v, float(np.max(self.a_ub @ x - self.b_ub, initial=0.0)))
        if self.a_eq.size:
            v = max(v, float(np.max(np.abs(self.a_eq @ x - self.b_eq),
                                    initial=0.0)))
        return v


class LpStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None = None
    phase1: float = float("nan")
    violation: float = float("nan")
    detail: str = ""


def solve_lp(p: LpProblem, tol_feas: float = TOL_FEAS,
             tol_infeas: float = TOL_INFEAS) -> LpResult:
    """Classify the system as FEASIBLE / INFEASIBLE / INDETERMINATE.

    The phase-1 program (always feasible, bounded below by zero) is

        min sum(s)  s.t.  a_ub x - s_ub <= b_ub,
                          a_eq x + s_eq+ - s_eq- = b_eq,  s >= 0,

    whose optimum is the L1 infeasibility of the original system.
    """
    n = p.num_vars
    m_ub = p.a_ub.shape[0] if p.a_ub.size else 0
    m_eq = p.a_eq.shape[0] if p.a_eq.size else 0
    ns = m_ub + 2 * m_eq
    if ns == 0:
        return LpResult(LpStatus.FEASIBLE, np.zeros(n), 0.0, 0.0)

    cost = np.concatenate([np.zeros(n), np.ones(ns)])
    a_ub = b_ub = None
    if m_ub:
        a_ub = np.hstack([p.a_ub, -np.eye(m_ub), np.zeros((m_ub, 2 * m_eq))])
        b_ub = p.b_ub
    a_eq = b_eq = None
    if m_eq:
        a_eq = np.hstack([p.a_eq, np.zeros((m_eq, m_ub)),
                          np.eye(m_eq), -np.eye(m_eq)])
        b_eq = p.b_eq
    bounds = [(None, None)] * n + [(0, None)] * ns

    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs", options=_HIGHS_OPTS)
    if res.status != 0:
        # HiGHS handles cycling internally; any non-optimal termination of
        # the (always feasible) phase-1 program is reported as undecided.
        return LpResult(LpStatus.INDETERMINATE,
                        detail=f"solver status {res.status}: {res.message}")

    p1 = float(res.fun)
    x = np.asarray(res.x[:n])
    viol = p.violation(x)
    if p1 <= tol_feas and viol <= tol_feas:
        return LpResult(LpStatus.FEASIBLE, x, p1, viol)
    if p1 >= tol_infeas:
        return LpResult(LpStatus.INFEASIBLE, None, p1, viol)
    return LpResult(LpStatus.INDETERMINATE, None, p1, viol,
                    detail="phase-1 optimum inside the tolerance band")


def maximize_margin(p: LpProblem, margin_rows: np.ndarray | None = None):
    """Maximize the smallest slack of the inequality rows of p.

    Solves max t s.t. a_ub x + t <= b_ub (on the selected rows),
    a_eq x = b_eq.  Returns (x, t*) or (None, None) on solver failure.
    Used to extract well-centered witnesses from feasible systems; a
    negative optimum means the system is infeasible.
    """
    n = p.num_vars
    m_ub = p.a_ub.shape[0]
    sel = np.ones(m_ub, dtype=bool) if margin_rows is None else margin_rows
    a_ub = np.hstack([p.a_ub, sel.astype(float)[:, None]])
    a_eq = None
    b_eq = None
    if p.a_eq.size:
        a_eq = np.hstack([p.a_eq, np.zeros((p.a_eq.shape[0], 1))])
        b_eq = p.b_eq
    cost = np.zeros(n + 1)
    cost[n] = -1.0
    res = linprog(cost, A_ub=a_ub, b_ub=p.b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(None, None)] * (n + 1), method="highs",
                  options=_HIGHS_OPTS)
    if res.status != 0:
        return None, None
    return np.asarray(res.x[:n]), float(res.x[n])
