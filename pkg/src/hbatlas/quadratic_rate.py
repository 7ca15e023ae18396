"""Asymptotic heavy-ball rate on quadratics with spectrum in [mu, L].

On the eigenmode with curvature lam, the iteration is the linear two-step
recursion with characteristic polynomial z^2 - (1 + beta - gamma*lam) z
+ beta; the per-mode rate is the larger root modulus.  The class rate is
the maximum over the spectrum, which is attained at an endpoint (the root
modulus is quasiconvex in lam); that endpoint claim is property-tested
against a dense grid rather than assumed.
"""

from __future__ import annotations

import numpy as np

from .core import ClassParams, Tuning


def spectral_radius_eigen(t: Tuning, lam):
    """Larger root modulus of z^2 - a z + beta, a = 1 + beta - gamma*lam.

    Accepts a scalar or an array of curvatures; returns the same shape.
    Complex roots (beta >= 0, a^2 <= 4 beta) give sqrt(beta) exactly.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("curvature must be positive")
    a = 1.0 + t.beta - t.gamma * lam
    disc = a * a - 4.0 * t.beta
    real = (np.abs(a) + np.sqrt(np.maximum(disc, 0.0))) / 2.0
    rho = np.where(disc <= 0.0, np.sqrt(max(t.beta, 0.0)), real)
    return float(rho) if rho.ndim == 0 else rho


def rate_over_class(t: Tuning, c: ClassParams) -> float:
    """Worst-case asymptotic rate over all quadratics of the class."""
    return max(spectral_radius_eigen(t, c.mu), spectral_radius_eigen(t, c.L))


def default_accel_threshold(c: ClassParams) -> float:
    # presentation-only marker separating "bright" accelerated cells
    return float(np.sqrt(1.0 - np.sqrt(c.mu / c.L)))


def rate_map(gridspec, c: ClassParams, accel_threshold: float | None = None):
    """Per-cell rate_over_class on the grid; see atlas.RegionGrid.

    Returns a RegionGrid whose cells are floats, with accel_mask flagging
    cells whose rate is below the threshold (default
    sqrt(1 - sqrt(mu/L)); carries no correctness claim).
    """
    from .atlas import RegionGrid  # local import to avoid a cycle

    if gridspec.nx < 2 or gridspec.ny < 2:
        raise ValueError("rate map needs at least a 2x2 grid")
    if accel_threshold is None:
        accel_threshold = default_accel_threshold(c)
    cells = []
    mask = []
    for beta in gridspec.betas():
        for gamma in gridspec.gammas():
            rho = rate_over_class(Tuning(gamma, beta), c)
            cells.append(rho)
            mask.append(rho < accel_threshold)
    prov = {
        "kind": "rate_map",
        "accel_threshold": accel_threshold,
    }
    return RegionGrid(spec=gridspec, class_params=c, cells=cells,
                      provenance=prov, accel_mask=mask)
