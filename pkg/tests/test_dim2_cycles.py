import numpy as np
import pytest

from hbatlas import (ClassParams, DataPoint, GridSpec, RootsCycle, Tuning,
                     dim2_region, interp_residual, roots_cycle_feasible)
from hbatlas.core import _step_scalar
from hbatlas.cycle_lp import circulant_matrix
from hbatlas.dim2_cycles import roots_points, value_feasibility_lp
from hbatlas.lp import LpStatus, solve_lp

C10 = ClassParams(1.0, 10.0)
GREEN10 = Tuning(0.1, 0.0)
# well inside the published cycle region for mu=1, L=10
CYCLING = Tuning(0.35, 0.1)


def test_green_tuning_infeasible_for_all_k():
    for k in range(3, 26):
        assert roots_cycle_feasible(GREEN10, C10, k) is None


def test_cycling_tuning_feasible_somewhere():
    found = [k for k in range(3, 9)
             if roots_cycle_feasible(CYCLING, C10, k) is not None]
    assert found, "expected a short cycle at a deep-purple tuning"


def test_gradients_match_componentwise_circulant():
    for k in range(3, 9):
        cyc = roots_cycle_feasible(CYCLING, C10, k)
        if cyc is None:
            continue
        ref = circulant_matrix(cyc.tuning, k) @ cyc.points
        assert np.allclose(cyc.grads, ref, atol=1e-12)


def test_certificate_residuals_with_minimizer():
    cyc = next(roots_cycle_feasible(CYCLING, C10, k)
               for k in range(3, 9)
               if roots_cycle_feasible(CYCLING, C10, k) is not None)
    pts = [DataPoint(cyc.points[i], cyc.grads[i], float(cyc.fvals[i]))
           for i in range(cyc.k)]
    for pi in pts:
        for pj in pts:
            if pi is not pj:
                assert interp_residual(pi, pj, C10) >= -1e-9


def test_replay_with_stored_gradients():
    cyc = next(roots_cycle_feasible(CYCLING, C10, k)
               for k in range(3, 9)
               if roots_cycle_feasible(CYCLING, C10, k) is not None)
    k = cyc.k
    xs = [cyc.points[0], cyc.points[1]]
    for step in range(1, k + 1):
        g = cyc.grads[step % k]
        xs.append(_step_scalar(xs[-2], xs[-1], g,
                               cyc.tuning.gamma, cyc.tuning.beta))
    expected = [cyc.points[(i) % k] for i in range(2, k + 2)]
    assert np.max(np.abs(np.array(xs[2:]) - np.array(expected))) <= 1e-10


def test_constant_value_solution_also_feasible():
    # averaging over the cyclic symmetry preserves every constraint, so
    # whenever the LP is feasible the all-equal assignment must be too
    for k in (4, 5, 6):
        base = solve_lp(value_feasibility_lp(CYCLING, C10, k)).status
        if base is not LpStatus.FEASIBLE:
            continue
        p = value_feasibility_lp(CYCLING, C10, k)
        eq_rows = np.zeros((k - 1, k))
        for i in range(k - 1):
            eq_rows[i, i] = 1.0
            eq_rows[i, i + 1] = -1.0
        p.a_eq = np.vstack([p.a_eq, eq_rows])
        p.b_eq = np.concatenate([p.b_eq, np.zeros(k - 1)])
        assert solve_lp(p).status is LpStatus.FEASIBLE


def test_cyclic_relabeling_invariance():
    # rotating the starting index relabels rows/columns only
    k = 5
    pts = roots_points(k)
    rolled = np.roll(pts, 2, axis=0)
    assert np.allclose(np.roll(circulant_matrix(CYCLING, k) @ pts, 2, axis=0),
                       circulant_matrix(CYCLING, k) @ rolled, atol=1e-12)


def test_homogeneity_under_joint_scaling():
    for k in (3, 5):
        for c_scale in (0.1, 10.0):
            a = roots_cycle_feasible(CYCLING, C10, k) is not None
            b = roots_cycle_feasible(
                Tuning(CYCLING.gamma / c_scale, CYCLING.beta),
                ClassParams(C10.mu * c_scale, C10.L * c_scale), k) is not None
            assert a == b


def test_region_monotone_in_kmax():
    spec = GridSpec(0.05, 0.4, -0.6, 0.6, 4, 4)
    r4 = dim2_region(spec, C10, 4)
    r8 = dim2_region(spec, C10, 8)
    for a, b in zip(r4.cells, r8.cells):
        if a is not None:
            assert b is not None and b <= a


def test_json_roundtrip():
    cyc = next(roots_cycle_feasible(CYCLING, C10, k)
               for k in range(3, 9)
               if roots_cycle_feasible(CYCLING, C10, k) is not None)
    other = RootsCycle.from_json(cyc.to_json())
    assert other.k == cyc.k
    assert np.array_equal(other.points, cyc.points)
    assert np.array_equal(other.fvals, cyc.fvals)
