"""Domain types and scalar machinery shared by every analyzer.

Contains the class/tuning parameter types, the smooth-strongly-convex
interpolation residual, 1-D function reconstruction from (point, gradient)
data, the heavy-ball iterator, and a heuristic trajectory classifier.
All values are immutable after construction; every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidClassError(ValueError):
    """Raised when (mu, L) do not define a valid function class."""


class NotInClassError(ValueError):
    """Raised when data cannot be interpolated by any function of the class."""


class InconsistentDataError(ValueError):
    """Raised when duplicate points carry contradictory gradients."""


class IndeterminateError(RuntimeError):
    """A numerical sub-solver could not decide feasibility either way.

    Distinct from infeasibility: callers must not treat an indeterminate
    outcome as evidence in either direction.
    """


@dataclass(frozen=True)
class ClassParams:
    """Strong convexity / smoothness moduli (mu, L) with 0 < mu < L."""

    mu: float
    L: float

    def __post_init__(self):
        if not (0.0 < self.mu < self.L):
            raise InvalidClassError(
                f"need 0 < mu < L, got mu={self.mu}, L={self.L}"
            )


@dataclass(frozen=True)
class Tuning:
    """Heavy-ball step size gamma > 0 and momentum coefficient beta.

    beta is not range-restricted here; atlas sweeps confine themselves to
    beta in (-1, 1), outside which the recursion is unstable on every
    quadratic.
    """

    gamma: float
    beta: float

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError(f"step size must be positive, got {self.gamma}")


@dataclass(frozen=True)
class HbState:
    """Two consecutive iterates (the full state of the two-step recursion)."""

    x_prev: float | np.ndarray
    x_cur: float | np.ndarray


@dataclass(frozen=True)
class DataPoint:
    """A (point, gradient, value) triple; the minimizer is (x*, 0, 0)."""

    x: float | np.ndarray
    g: float | np.ndarray
    f: float

    def __post_init__(self):
        if np.shape(self.x) != np.shape(self.g):
            raise ValueError("point and gradient shapes disagree")


def _step_scalar(x_prev, x_cur, grad, gamma, beta):
    # Single source of truth for the update's float expression: cycle
    # certificates are calibrated against exactly this evaluation order.
    return x_cur - gamma * grad + beta * (x_cur - x_prev)


def hb_step(state: HbState, grad_at_cur, t: Tuning) -> HbState:
    """One heavy-ball update: x+ = x - gamma*g + beta*(x - x_prev)."""
    return HbState(state.x_cur, _step_scalar(state.x_prev, state.x_cur,
                                             grad_at_cur, t.gamma, t.beta))


def interp_residual(p_i: DataPoint, p_j: DataPoint, c: ClassParams) -> float:
    """Interpolation residual r_ij of the ordered pair (i, j).

    A finite data set is interpolable by some L-smooth mu-strongly-convex
    function iff r_ij >= 0 for every ordered pair.  The residual is

        r_ij = f_i - f_j - <g_j, x_i - x_j>
               - (1 / (2 (1 - mu/L))) * ( ||g_i - g_j||^2 / L
                                          + mu ||x_i - x_j||^2
                                          - (2 mu / L) <g_i - g_j, x_i - x_j> )
    """
    dx = np.asarray(p_i.x, dtype=float) - np.asarray(p_j.x, dtype=float)
    dg = np.asarray(p_i.g, dtype=float) - np.asarray(p_j.g, dtype=float)
    gj = np.asarray(p_j.g, dtype=float)
    coef = 1.0 / (2.0 * (1.0 - c.mu / c.L))
    quad = (float(np.vdot(dg, dg)) / c.L
            + c.mu * float(np.vdot(dx, dx))
            - (2.0 * c.mu / c.L) * float(np.vdot(dg, dx)))
    return p_i.f - p_j.f - float(np.vdot(gj, dx)) - coef * quad


@dataclass(frozen=True)
class PiecewiseModel1D:
    """A scalar function given by a piecewise-linear gradient.

    knots are strictly increasing; the gradient interpolates (knots, grads)
    linearly and continues beyond the outermost knots with extension_slope.
    values[i] is the exact integral of that gradient from knots[0], anchored
    at values[0] = 0 (a display convention; the iterator only reads
    gradients).
    """

    knots: np.ndarray
    grads: np.ndarray
    values: np.ndarray
    extension_slope: float

    def gradient(self, x: float) -> float:
        xs, gs = self.knots, self.grads
        if x <= xs[0]:
            return gs[0] + self.extension_slope * (x - xs[0])
        if x >= xs[-1]:
            return gs[-1] + self.extension_slope * (x - xs[-1])
        # side='right' puts queries equal to a knot in the cell to its
        # right, so w == 0 there and the stored gradient is returned bit-exact
        i = int(np.searchsorted(xs, x, side="right")) - 1
        w = (x - xs[i]) / (xs[i + 1] - xs[i])
        return gs[i] + w * (gs[i + 1] - gs[i])

    def value(self, x: float) -> float:
        xs, gs, fs = self.knots, self.grads, self.values
        if x <= xs[0]:
            d = x - xs[0]
            return fs[0] + gs[0] * d + 0.5 * self.extension_slope * d * d
        if x >= xs[-1]:
            d = x - xs[-1]
            return fs[-1] + gs[-1] * d + 0.5 * self.extension_slope * d * d
        i = int(np.searchsorted(xs, x, side="right")) - 1
        d = x - xs[i]
        slope = (gs[i + 1] - gs[i]) / (xs[i + 1] - xs[i])
        return fs[i] + gs[i] * d + 0.5 * slope * d * d


def reconstruct_function_1d(
    X,
    G,
    c: ClassParams,
    extension_slope: float | None = None,
    slope_tol: float = 1e-9,
    merge_tol: float = 1e-12,
) -> PiecewiseModel1D:
    """Build the piecewise-linear-gradient interpolant of 1-D data.

    In one dimension, membership of the data in the class is equivalent to
    every consecutive sorted secant slope lying in [mu, L]; the resulting
    interpolant then realizes the data exactly.

    Points closer than merge_tol * spread are merged and must agree in
    gradient to the same relative tolerance.  Slopes may exceed [mu, L] by
    at most slope_tol (absolute).
    """
    X = np.asarray(X, dtype=float)
    G = np.asarray(G, dtype=float)
    if X.shape != G.shape or X.ndim != 1 or X.size < 2:
        raise ValueError("need matching 1-D arrays with at least two points")
    if extension_slope is None:
        extension_slope = 0.5 * (c.mu + c.L)
    if not (c.mu - slope_tol <= extension_slope <= c.L + slope_tol):
        raise NotInClassError(
            f"extension slope {extension_slope} outside [{c.mu}, {c.L}]"
        )

    order = np.argsort(X, kind="stable")
    xs, gs = X[order], G[order]
    spread = xs[-1] - xs[0]
    if spread <= 0.0:
        raise InconsistentDataError("all points coincide")
    gscale = max(np.max(np.abs(gs)), 1.0)

    keep_x, keep_g = [xs[0]], [gs[0]]
    for xq, gq in zip(xs[1:], gs[1:]):
        if xq - keep_x[-1] <= merge_tol * spread:
            if abs(gq - keep_g[-1]) > merge_tol * gscale:
                raise InconsistentDataError(
                    f"duplicate point x={xq} with distinct gradients"
                )
            continue
        keep_x.append(xq)
        keep_g.append(gq)
    kx = np.asarray(keep_x)
    kg = np.asarray(keep_g)
    if kx.size < 2:
        raise InconsistentDataError("fewer than two distinct points")

    slopes = np.diff(kg) / np.diff(kx)
    if slopes.min() < c.mu - slope_tol or slopes.max() > c.L + slope_tol:
        raise NotInClassError(
            f"secant slope outside [{c.mu}, {c.L}]: "
            f"range [{slopes.min()}, {slopes.max()}]"
        )

    # trapezoid rule is exact for a piecewise-linear gradient
    vals = np.concatenate(
        [[0.0], np.cumsum(0.5 * (kg[1:] + kg[:-1]) * np.diff(kx))]
    )
    return PiecewiseModel1D(kx, kg, vals, float(extension_slope))


_OVERFLOW_LIMIT = 1e150


def simulate_hb(model: PiecewiseModel1D, x0: float, x1: float, t: Tuning,
                steps: int) -> np.ndarray:
    """Run heavy-ball on the model's gradient for `steps` updates.

    Returns the trajectory (x0, x1, ...) of length steps + 2, truncated
    early if the iterates overflow (the truncated tail marks divergence).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    traj = [float(x0), float(x1)]
    for _ in range(steps):
        g = model.gradient(traj[-1])
        nxt = _step_scalar(traj[-2], traj[-1], g, t.gamma, t.beta)
        if not math.isfinite(nxt) or abs(nxt) > _OVERFLOW_LIMIT:
            traj.append(nxt)
            break
        traj.append(nxt)
    return np.asarray(traj)


@dataclass(frozen=True)
class TrajectoryBehavior:
    kind: str          # converged | periodic | divergent | undetermined
    period: int | None = None


def classify_trajectory(traj, tol_conv: float, tol_per: float, kmax: int,
                        divergence_bound: float | None = None
                        ) -> TrajectoryBehavior:
    """Heuristic tail classification of a scalar trajectory.

    converged: tail within tol_conv of a constant; periodic(K): smallest
    K <= kmax with a K-periodic tail (tol_per); divergent: magnitude beyond
    the bound (default 1e12 x max(1, |x0|, |x1|)); else undetermined.
    """
    traj = np.asarray(traj, dtype=float)
    if traj.size < 2 * kmax + 2:
        raise ValueError("trajectory too short for the requested kmax")
    if divergence_bound is None:
        divergence_bound = 1e12 * max(1.0, abs(traj[0]), abs(traj[1]))
    if not np.all(np.isfinite(traj)) or np.max(np.abs(traj)) > divergence_bound:
        return TrajectoryBehavior("divergent")

    tail = traj[max(traj.size // 2, traj.size - 20 * kmax):]
    mid = 0.5 * (tail.max() + tail.min())
    if np.max(np.abs(tail - mid)) <= tol_conv:
        return TrajectoryBehavior("converged")
    for k in range(1, kmax + 1):
        if np.max(np.abs(tail[k:] - tail[:-k])) <= tol_per:
            return TrajectoryBehavior("periodic", k)
    return TrajectoryBehavior("undetermined")
