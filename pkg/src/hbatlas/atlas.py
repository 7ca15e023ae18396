"""Parameter-plane sweeps, per-cell classification, and exports.

A sweep samples the (gamma, beta) plane at cell centers, runs the
Lyapunov search and the cycle search on every cell, and combines the
verdicts: green needs a verified Lyapunov certificate, purple a verified
cycle certificate, and a cell carrying both aborts the run (two verified
certificates of contradictory facts mean a bug, not a result).  Cells with
neither are the unknown region; cells where some sub-solver was undecided
are flagged so genuine unknowns stay distinguishable from solver failures.

Exports: CSV (columns gamma,beta,class,rho,min_k,source), JSON with full
provenance, a plain rectangle-per-cell SVG, and a matplotlib rendering.
All floats are serialized with 17 significant digits, and the output
bytes depend only on the run configuration, never on worker count.
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass

import numpy as np

from .core import ClassParams, IndeterminateError, Tuning
from .cycle_lp import CycleCertificate, cycle_exists_dim1, lp_feasible_sigma, \
    conjectured_permutation
from .dim2_cycles import RootsCycle, roots_cycle_feasible
from .lyapunov_pep import LyapunovCertificate, lyapunov_feasible
from .serialize import dumps_17g, fmt17

FORMAT_VERSION = "hbatlas-1"


class ConflictError(RuntimeError):
    """A cell carries both a verified Lyapunov and a verified cycle
    certificate; both are attached for diagnosis."""

    def __init__(self, message, lyapunov_json="", cycle_json=""):
        super().__init__(message)
        self.lyapunov_json = lyapunov_json
        self.cycle_json = cycle_json


@dataclass(frozen=True)
class GridSpec:
    """Rectangular cell grid over the tuning plane; cells are sampled at
    their centers, so the stated bounds are outer edges."""

    gamma_min: float
    gamma_max: float
    beta_min: float
    beta_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.gamma_min < self.gamma_max
                and self.beta_min < self.beta_max):
            raise ValueError("grid bounds must satisfy min < max")
        if self.gamma_min < 0.0:
            raise ValueError("gamma edge cannot be negative")
        if not (-1.0 <= self.beta_min and self.beta_max <= 1.0):
            raise ValueError("beta edges must lie in [-1, 1]")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("need at least 2 cells per axis")

    def gammas(self) -> np.ndarray:
        h = (self.gamma_max - self.gamma_min) / self.nx
        return self.gamma_min + (np.arange(self.nx) + 0.5) * h

    def betas(self) -> np.ndarray:
        h = (self.beta_max - self.beta_min) / self.ny
        return self.beta_min + (np.arange(self.ny) + 0.5) * h

    def cell_size(self) -> tuple[float, float]:
        return ((self.gamma_max - self.gamma_min) / self.nx,
                (self.beta_max - self.beta_min) / self.ny)

    def to_dict(self) -> dict:
        return {
            "gamma_min": self.gamma_min, "gamma_max": self.gamma_max,
            "beta_min": self.beta_min, "beta_max": self.beta_max,
            "nx": self.nx, "ny": self.ny,
        }


@dataclass(frozen=True)
class Classification:
    """Verdict for one tuning: lyapunov | cycle | unknown | conflict."""

    tag: str
    rho: float | None = None
    min_k: int | None = None
    source: str | None = None        # dim1 | dim2 for cycles
    indeterminate: bool = False      # some sub-solver was undecided
    lyapunov_json: str = ""
    cycle_json: str = ""


@dataclass
class SweepConfig:
    """Per-cell analyzer settings for classify_point/sweep."""

    kmax: int = 8
    mode: str = "conjectured"        # dim-1 permutation search mode
    rho: float = 1.0
    use_dim2: bool = False
    keep_certificates: bool = False
    tol_feas: float | None = None    # LP tolerance band overrides
    tol_infeas: float | None = None

    def to_dict(self) -> dict:
        from .lp import TOL_FEAS, TOL_INFEAS

        return {
            "kmax": self.kmax, "mode": self.mode, "rho": self.rho,
            "use_dim2": self.use_dim2,
            "tol_feas": self.tol_feas if self.tol_feas is not None
            else TOL_FEAS,
            "tol_infeas": self.tol_infeas if self.tol_infeas is not None
            else TOL_INFEAS,
        }


@dataclass
class RegionGrid:
    """Cells in row-major order (beta rows, gamma within a row) plus the
    provenance needed to reproduce them byte-for-byte."""

    spec: GridSpec
    class_params: ClassParams
    cells: list
    provenance: dict
    accel_mask: list | None = None

    def cell(self, iy: int, ix: int):
        return self.cells[iy * self.spec.nx + ix]


def classify_point(t: Tuning, c: ClassParams,
                   cfg: SweepConfig | None = None) -> Classification:
    """Classify one tuning by running both certificate searches."""
    cfg = cfg or SweepConfig()
    indet = False

    lyap: LyapunovCertificate | None = None
    try:
        lyap = lyapunov_feasible(t, c, cfg.rho)
    except IndeterminateError:
        indet = True

    cyc: CycleCertificate | None = None
    try:
        cyc = cycle_exists_dim1(t, c, cfg.kmax, cfg.mode,
                                cfg.tol_feas, cfg.tol_infeas)
    except IndeterminateError:
        indet = True

    cyc2: RootsCycle | None = None
    if cfg.use_dim2 and cyc is None:
        for k in range(3, cfg.kmax + 1):
            try:
                cyc2 = roots_cycle_feasible(t, c, k)
            except IndeterminateError:
                indet = True
                cyc2 = None
            if cyc2 is not None:
                break

    has_cycle = cyc is not None or cyc2 is not None
    if lyap is not None and has_cycle:
        cyc_json = cyc.to_json() if cyc is not None else cyc2.to_json()
        return Classification(
            tag="conflict", rho=cfg.rho,
            min_k=cyc.k if cyc is not None else cyc2.k,
            lyapunov_json=lyap.to_json(), cycle_json=cyc_json,
        )
    if lyap is not None:
        return Classification(
            tag="lyapunov", rho=cfg.rho, indeterminate=indet,
            lyapunov_json=lyap.to_json() if cfg.keep_certificates else "",
        )
    if cyc is not None:
        return Classification(
            tag="cycle", min_k=cyc.k, source="dim1", indeterminate=indet,
            cycle_json=cyc.to_json() if cfg.keep_certificates else "",
        )
    if cyc2 is not None:
        return Classification(
            tag="cycle", min_k=cyc2.k, source="dim2", indeterminate=indet,
            cycle_json=cyc2.to_json() if cfg.keep_certificates else "",
        )
    return Classification(tag="unknown", indeterminate=indet)


def _sweep_cell(args):
    gamma, beta, c, cfg = args
    return classify_point(Tuning(gamma, beta), c, cfg)


def parallel_map(fn, items, workers: int):
    """Order-preserving map, optionally over a process pool.

    Results are collected in input order, so the output is independent of
    worker count and scheduling.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (8 * workers))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def sweep(spec: GridSpec, c: ClassParams, cfg: SweepConfig | None = None,
          workers: int = 1) -> RegionGrid:
    """Classify every cell center; aborts on any conflict cell."""
    cfg = cfg or SweepConfig()
    tasks = [(gamma, beta, c, cfg)
             for beta in spec.betas() for gamma in spec.gammas()]
    cells = parallel_map(_sweep_cell, tasks, workers)
    for cell, task in zip(cells, tasks):
        if cell.tag == "conflict":
            raise ConflictError(
                f"tuning gamma={task[0]}, beta={task[1]} carries both "
                "certificates; dumping both",
                lyapunov_json=cell.lyapunov_json,
                cycle_json=cell.cycle_json,
            )
    prov = {
        "format": FORMAT_VERSION,
        "kind": "classification",
        "grid": spec.to_dict(),
        "mu": c.mu,
        "L": c.L,
        "config": cfg.to_dict(),
    }
    return RegionGrid(spec=spec, class_params=c, cells=cells, provenance=prov)


def _cycle_cell(args):
    gamma, beta, c, kmax, mode, keep, tol_feas, tol_infeas = args
    try:
        cert = cycle_exists_dim1(Tuning(gamma, beta), c, kmax, mode,
                                 tol_feas, tol_infeas)
    except IndeterminateError:
        return Classification(tag="unknown", indeterminate=True)
    if cert is None:
        return Classification(tag="unknown")
    return Classification(tag="cycle", min_k=cert.k, source="dim1",
                          cycle_json=cert.to_json() if keep else "")


def cycle_map(spec: GridSpec, c: ClassParams, kmax: int = 8,
              mode: str = "conjectured", workers: int = 1,
              keep_certificates: bool = False, tol_feas: float | None = None,
              tol_infeas: float | None = None) -> RegionGrid:
    """Dimension-1 cycle sweep: smallest feasible K per cell."""
    tasks = [(gamma, beta, c, kmax, mode, keep_certificates,
              tol_feas, tol_infeas)
             for beta in spec.betas() for gamma in spec.gammas()]
    cells = parallel_map(_cycle_cell, tasks, workers)
    prov = {
        "format": FORMAT_VERSION, "kind": "cycle_map",
        "grid": spec.to_dict(), "mu": c.mu, "L": c.L,
        "config": {"kmax": kmax, "mode": mode},
    }
    return RegionGrid(spec=spec, class_params=c, cells=cells, provenance=prov)


def _lyapunov_cell(args):
    gamma, beta, c, rho, keep = args
    try:
        cert = lyapunov_feasible(Tuning(gamma, beta), c, rho)
    except IndeterminateError:
        return Classification(tag="unknown", indeterminate=True)
    if cert is None:
        return Classification(tag="unknown")
    return Classification(tag="lyapunov", rho=rho,
                          lyapunov_json=cert.to_json() if keep else "")


def lyapunov_map(spec: GridSpec, c: ClassParams, rho: float = 1.0,
                 workers: int = 1, keep_certificates: bool = False
                 ) -> RegionGrid:
    """Lyapunov-certificate sweep at a fixed contraction factor."""
    tasks = [(gamma, beta, c, rho, keep_certificates)
             for beta in spec.betas() for gamma in spec.gammas()]
    cells = parallel_map(_lyapunov_cell, tasks, workers)
    prov = {
        "format": FORMAT_VERSION, "kind": "lyapunov_map",
        "grid": spec.to_dict(), "mu": c.mu, "L": c.L,
        "config": {"rho": rho},
    }
    return RegionGrid(spec=spec, class_params=c, cells=cells, provenance=prov)


def _census_cell(args):
    gamma, beta, c, k = args
    from .cycle_lp import feasibility_census

    return feasibility_census(Tuning(gamma, beta), c, k)


def permutation_census_map(spec: GridSpec, c: ClassParams, k: int,
                           workers: int = 1) -> dict:
    """Per-permutation feasibility over the grid.

    Returns {permutation images: list of bool in row-major cell order}.
    """
    from .cycle_lp import reduced_permutations

    tasks = [(gamma, beta, c, k)
             for beta in spec.betas() for gamma in spec.gammas()]
    per_cell = parallel_map(_census_cell, tasks, workers)
    out = {p.images: [] for p in reduced_permutations(k)}
    for cell in per_cell:
        for images, feas in cell.items():
            out[images].append(feas)
    return out


def border_bisect(c: ClassParams, k: int, ray: tuple[Tuning, Tuning],
                  tol: float = 1e-4) -> Tuning:
    """Bisect a tuning segment for the K-cycle feasibility border.

    The endpoints must have opposite feasibility status (fixed K,
    conjectured permutation); undecided solves count as infeasible.
    Returns the midpoint of the final bracket.
    """
    sigma = conjectured_permutation(k)

    def feas(t: Tuning) -> bool:
        try:
            return lp_feasible_sigma(t, c, k, sigma) is not None
        except IndeterminateError:
            return False

    lo, hi = ray
    f_lo, f_hi = feas(lo), feas(hi)
    if f_lo == f_hi:
        raise ValueError("ray endpoints have the same feasibility status")
    while max(abs(hi.gamma - lo.gamma), abs(hi.beta - lo.beta)) > tol:
        mid = Tuning(0.5 * (lo.gamma + hi.gamma), 0.5 * (lo.beta + hi.beta))
        if feas(mid) == f_lo:
            lo = mid
        else:
            hi = mid
    return Tuning(0.5 * (lo.gamma + hi.gamma), 0.5 * (lo.beta + hi.beta))


# ---------------------------------------------------------------------------
# exports

def _cell_row(gamma: float, beta: float, cell) -> str:
    gam, bet = fmt17(gamma), fmt17(beta)
    if isinstance(cell, Classification):
        rho = fmt17(cell.rho) if cell.rho is not None else ""
        min_k = str(cell.min_k) if cell.min_k is not None else ""
        source = cell.source or ""
        if cell.tag == "unknown" and cell.indeterminate:
            source = "indeterminate"
        return f"{gam},{bet},{cell.tag},{rho},{min_k},{source}"
    if cell is None:
        return f"{gam},{bet},unknown,,,"
    if isinstance(cell, (int, np.integer)):
        return f"{gam},{bet},cycle,,{int(cell)},dim2"
    return f"{gam},{bet},,{fmt17(float(cell))},,"


def export_csv(grid: RegionGrid, path) -> None:
    """Write the grid as CSV with embedded provenance comment lines."""
    lines = [
        f"# format: {FORMAT_VERSION}",
        f"# provenance: {dumps_17g(grid.provenance)}",
        "gamma,beta,class,rho,min_k,source",
    ]
    gammas, betas = grid.spec.gammas(), grid.spec.betas()
    for iy, beta in enumerate(betas):
        for ix, gamma in enumerate(gammas):
            lines.append(_cell_row(gamma, beta, grid.cell(iy, ix)))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _cell_to_obj(cell):
    if isinstance(cell, Classification):
        return {
            "tag": cell.tag, "rho": cell.rho, "min_k": cell.min_k,
            "source": cell.source, "indeterminate": cell.indeterminate,
            "lyapunov": json.loads(cell.lyapunov_json)
            if cell.lyapunov_json else None,
            "cycle": json.loads(cell.cycle_json)
            if cell.cycle_json else None,
        }
    if cell is None or isinstance(cell, (int, np.integer)):
        return None if cell is None else int(cell)
    return float(cell)


def export_json(grid: RegionGrid, path) -> None:
    doc = {
        "format": FORMAT_VERSION,
        "grid": grid.spec.to_dict(),
        "class": {"mu": grid.class_params.mu, "L": grid.class_params.L},
        "provenance": grid.provenance,
        "cells": [_cell_to_obj(c) for c in grid.cells],
        "accel_mask": grid.accel_mask,
    }
    with open(path, "w", newline="") as fh:
        fh.write(dumps_17g(doc) + "\n")


def import_json(path) -> RegionGrid:
    with open(path) as fh:
        doc = json.load(fh)
    spec = GridSpec(**doc["grid"])
    cells = []
    for obj in doc["cells"]:
        if isinstance(obj, dict):
            cells.append(Classification(
                tag=obj["tag"], rho=obj["rho"], min_k=obj["min_k"],
                source=obj["source"], indeterminate=obj["indeterminate"],
                lyapunov_json=dumps_17g(obj["lyapunov"])
                if obj.get("lyapunov") else "",
                cycle_json=dumps_17g(obj["cycle"])
                if obj.get("cycle") else "",
            ))
        else:
            cells.append(obj)
    return RegionGrid(
        spec=spec,
        class_params=ClassParams(doc["class"]["mu"], doc["class"]["L"]),
        cells=cells,
        provenance=doc["provenance"],
        accel_mask=doc.get("accel_mask"),
    )


GREEN = "#2aa05a"
PURPLE_SHADES = ("#2d004b", "#54278f", "#756bb1", "#9e9ac8", "#bcbddc",
                 "#dadaeb")
WHITE = "#ffffff"
INDET = "#dddddd"


def _cell_color(cell, kmax: int) -> str:
    if isinstance(cell, Classification):
        if cell.tag == "lyapunov":
            return GREEN
        if cell.tag == "cycle":
            shade = min(max((cell.min_k or 3) - 3, 0), len(PURPLE_SHADES) - 1)
            return PURPLE_SHADES[shade]
        if cell.tag == "unknown" and cell.indeterminate:
            return INDET
        return WHITE
    if cell is None:
        return WHITE
    if isinstance(cell, (int, np.integer)):
        shade = min(max(int(cell) - 3, 0), len(PURPLE_SHADES) - 1)
        return PURPLE_SHADES[shade]
    # scalar rate cell: dark for fast rates, white toward 1, red beyond
    v = float(cell)
    if v >= 1.0:
        return "#f4a6a6"
    level = int(255 * max(min(v, 1.0), 0.0))
    return f"#{level:02x}{level:02x}{255:02x}"


def render_svg(grid: RegionGrid, path, palette=None, cell_px: int = 12
               ) -> None:
    """Rectangle-per-cell SVG map of the grid (one <rect> per cell)."""
    nx, ny = grid.spec.nx, grid.spec.ny
    w, h = nx * cell_px, ny * cell_px
    kmax = grid.provenance.get("config", {}).get("kmax", 8)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f"<!-- {FORMAT_VERSION}; beta increases upward, gamma rightward -->",
    ]
    for iy in range(ny):
        for ix in range(nx):
            color = _cell_color(grid.cell(iy, ix), kmax)
            if palette:
                color = palette.get(color, color)
            x = ix * cell_px
            y = (ny - 1 - iy) * cell_px  # flip so beta grows upward
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell_px}" '
                f'height="{cell_px}" fill="{color}"/>'
            )
    parts.append("</svg>")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(parts) + "\n")


def render_png(grid: RegionGrid, path, title: str = "") -> None:
    """Matplotlib rendering of the grid (report figure)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import ListedColormap

    nx, ny = grid.spec.nx, grid.spec.ny
    kmax = grid.provenance.get("config", {}).get("kmax", 8)
    scalar = grid.cells and not isinstance(grid.cells[0], Classification) \
        and grid.cells[0] is not None and not isinstance(grid.cells[0],
                                                         (int, np.integer))
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    extent = (grid.spec.gamma_min, grid.spec.gamma_max,
              grid.spec.beta_min, grid.spec.beta_max)
    if scalar:
        vals = np.array([float(v) for v in grid.cells]).reshape(ny, nx)
        im = ax.imshow(vals, origin="lower", extent=extent, aspect="auto",
                       cmap="viridis", vmin=0.0,
                       vmax=max(1.0, float(vals.max())))
        fig.colorbar(im, ax=ax, label="rate")
    else:
        colors = sorted({_cell_color(cl, kmax) for cl in grid.cells})
        lookup = {c: i for i, c in enumerate(colors)}
        idx = np.array([lookup[_cell_color(cl, kmax)] for cl in grid.cells])
        im = ax.imshow(idx.reshape(ny, nx), origin="lower", extent=extent,
                       aspect="auto", cmap=ListedColormap(colors))
    ax.set_xlabel(r"step size $\gamma$")
    ax.set_ylabel(r"momentum $\beta$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)
