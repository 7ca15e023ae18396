"""Command-line entry point.

Subcommands map one-to-one onto the experiments: rate-map (quadratic-class
rates), cycle-map (dimension-1 cycle region), lyapunov-map (certificate
region), classify (combined three-color map or a single tuning),
verify-cycle (re-check a certificate file), and permutation-atlas
(per-permutation feasibility maps at a fixed K).

Every run writes CSV + SVG + PNG under --out with deterministic names and
embeds its configuration in each file; outputs depend only on the
configuration, never on --threads.  Exit codes: 0 ok, 1 usage/config
error, 2 verification failure, 3 conflict abort.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from . import atlas
from .atlas import (Classification, ConflictError, GridSpec, RegionGrid,
                    SweepConfig)
from .core import ClassParams, Tuning
from .cycle_lp import CycleCertificate, verify_cycle_certificate
from .quadratic_rate import rate_map


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2)
        raise UsageError(message)


_FLAG_DEFAULTS = {
    "mu": 1.0,
    "L": 10.0,
    "gamma_min": 0.0,
    "gamma_max": None,   # 4 / L once L is known
    "beta_min": -1.0,
    "beta_max": 1.0,
    "nx": 60,
    "ny": 60,
    "kmax": 8,
    "mode": "conjectured",
    "rho": 1.0,
    "tol_feas": 1e-9,
    "tol_infeas": 1e-7,
    "threads": 0,        # 0 = available parallelism
    "out": "out",
    "seed": 0,
}

_FLOAT_KEYS = {"mu", "L", "gamma_min", "gamma_max", "beta_min", "beta_max",
               "rho", "tol_feas", "tol_infeas"}
_INT_KEYS = {"nx", "ny", "kmax", "threads", "seed"}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value file; flags override it")
    for key in _FLAG_DEFAULTS:
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, default=None,
                       type=str if key in ("mode", "out") else
                       (int if key in _INT_KEYS else float))


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key=value")
                key, _, val = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in _FLAG_DEFAULTS:
                    raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = val.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    return values


@dataclass
class RunConfig:
    """Validated run parameters; the provenance block of every output.

    threads and out steer execution only and are excluded from provenance
    so identical configurations give identical bytes.
    """

    command: str
    mu: float
    L: float
    gamma_min: float
    gamma_max: float
    beta_min: float
    beta_max: float
    nx: int
    ny: int
    kmax: int
    mode: str
    rho: float
    tol_feas: float
    tol_infeas: float
    threads: int
    out: str
    seed: int

    @property
    def class_params(self) -> ClassParams:
        return ClassParams(self.mu, self.L)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.gamma_min, self.gamma_max,
                        self.beta_min, self.beta_max, self.nx, self.ny)

    @property
    def workers(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def provenance(self) -> dict:
        keys = ("command", "mu", "L", "gamma_min", "gamma_max", "beta_min",
                "beta_max", "nx", "ny", "kmax", "mode", "rho", "tol_feas",
                "tol_infeas", "seed")
        return {k: getattr(self, k) for k in keys}


def _resolve(args: argparse.Namespace, command: str) -> RunConfig:
    file_vals = _read_config_file(args.config) if args.config else {}
    merged = {}
    for key, default in _FLAG_DEFAULTS.items():
        val = getattr(args, key)
        if val is None and key in file_vals:
            raw = file_vals[key]
            try:
                val = (int(raw) if key in _INT_KEYS
                       else float(raw) if key in _FLOAT_KEYS else raw)
            except ValueError:
                raise UsageError(f"config value for {key} not parseable: {raw}")
        if val is None:
            val = default
        merged[key] = val
    if merged["gamma_max"] is None:
        merged["gamma_max"] = 4.0 / merged["L"]
    cfg = RunConfig(command=command, **merged)
    try:
        cfg.class_params
        cfg.grid
    except ValueError as exc:
        raise UsageError(str(exc))
    if cfg.mode not in ("conjectured", "full"):
        raise UsageError(f"--mode must be conjectured or full, got {cfg.mode}")
    if not 0.0 < cfg.rho <= 1.0:
        raise UsageError("--rho must lie in (0, 1]")
    if cfg.kmax < 3:
        raise UsageError("--kmax must be >= 3")
    return cfg


def _outdir(cfg: RunConfig) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _write_grid(grid: RegionGrid, cfg: RunConfig, stem: str,
                title: str) -> None:
    grid.provenance["run_config"] = cfg.provenance()
    out = _outdir(cfg)
    atlas.export_csv(grid, os.path.join(out, f"{stem}.csv"))
    atlas.export_json(grid, os.path.join(out, f"{stem}.json"))
    atlas.render_svg(grid, os.path.join(out, f"{stem}.svg"))
    atlas.render_png(grid, os.path.join(out, f"{stem}.png"), title=title)


def _dump_certs(grid: RegionGrid, cfg: RunConfig) -> None:
    certdir = os.path.join(_outdir(cfg), "certs")
    os.makedirs(certdir, exist_ok=True)
    nx = grid.spec.nx
    for idx, cell in enumerate(grid.cells):
        if not isinstance(cell, Classification):
            continue
        iy, ix = divmod(idx, nx)
        if cell.cycle_json:
            name = f"cycle_{iy:03d}_{ix:03d}.json"
            with open(os.path.join(certdir, name), "w", newline="") as fh:
                fh.write(cell.cycle_json + "\n")
        if cell.lyapunov_json:
            name = f"lyapunov_{iy:03d}_{ix:03d}.json"
            with open(os.path.join(certdir, name), "w", newline="") as fh:
                fh.write(cell.lyapunov_json + "\n")


def cmd_rate_map(cfg: RunConfig) -> int:
    grid = rate_map(cfg.grid, cfg.class_params)
    _write_grid(grid, cfg, "rate", "asymptotic rate on the quadratic class")
    print(f"rate map: {cfg.nx}x{cfg.ny} cells -> {cfg.out}/rate.csv")
    return 0


def cmd_cycle_map(cfg: RunConfig) -> int:
    grid = atlas.cycle_map(cfg.grid, cfg.class_params, kmax=cfg.kmax,
                           mode=cfg.mode, workers=cfg.workers,
                           keep_certificates=True, tol_feas=cfg.tol_feas,
                           tol_infeas=cfg.tol_infeas)
    _write_grid(grid, cfg, "cycles", f"cycle lengths up to K={cfg.kmax}")
    _dump_certs(grid, cfg)
    n_cyc = sum(1 for c in grid.cells
                if isinstance(c, Classification) and c.tag == "cycle")
    print(f"cycle map: {n_cyc} cycle cells -> {cfg.out}/cycles.csv")
    return 0


def cmd_lyapunov_map(cfg: RunConfig) -> int:
    grid = atlas.lyapunov_map(cfg.grid, cfg.class_params, rho=cfg.rho,
                              workers=cfg.workers, keep_certificates=True)
    _write_grid(grid, cfg, "lyapunov", f"Lyapunov region at rho={cfg.rho}")
    _dump_certs(grid, cfg)
    n_ly = sum(1 for c in grid.cells
               if isinstance(c, Classification) and c.tag == "lyapunov")
    print(f"lyapunov map: {n_ly} certified cells -> {cfg.out}/lyapunov.csv")
    return 0


def cmd_classify(cfg: RunConfig, gamma: float | None,
                 beta: float | None) -> int:
    sweep_cfg = SweepConfig(kmax=cfg.kmax, mode=cfg.mode, rho=cfg.rho,
                            use_dim2=True, keep_certificates=True,
                            tol_feas=cfg.tol_feas, tol_infeas=cfg.tol_infeas)
    if gamma is not None or beta is not None:
        if gamma is None or beta is None:
            raise UsageError("--gamma and --beta must be given together")
        cell = atlas.classify_point(Tuning(gamma, beta), cfg.class_params,
                                    sweep_cfg)
        if cell.tag == "conflict":
            print("conflict: both certificates verified", file=sys.stderr)
            return 3
        print(cell.tag)
        return 0
    grid = atlas.sweep(cfg.grid, cfg.class_params, sweep_cfg,
                       workers=cfg.workers)
    _write_grid(grid, cfg, "classify", "lyapunov / cycle / unknown")
    _dump_certs(grid, cfg)
    counts = {}
    for cell in grid.cells:
        counts[cell.tag] = counts.get(cell.tag, 0) + 1
    print("classify:", " ".join(f"{k}={v}" for k, v in sorted(counts.items())),
          f"-> {cfg.out}/classify.csv")
    return 0


def cmd_verify_cycle(cfg: RunConfig, cert_path: str) -> int:
    try:
        with open(cert_path) as fh:
            cert = CycleCertificate.from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot load certificate {cert_path}: {exc}", file=sys.stderr)
        return 2
    problems = verify_cycle_certificate(cert)
    if problems:
        for p in problems:
            print(f"FAIL: {p}", file=sys.stderr)
        return 2
    print(f"certificate verified: K={cert.k} at gamma={cert.tuning.gamma}, "
          f"beta={cert.tuning.beta}")
    return 0


def cmd_permutation_atlas(cfg: RunConfig) -> int:
    from .cycle_lp import conjectured_permutation

    k = cfg.kmax
    census = atlas.permutation_census_map(cfg.grid, cfg.class_params, k,
                                          workers=cfg.workers)
    out = _outdir(cfg)
    nonempty = 0
    conj = conjectured_permutation(k).images
    for images, flags in sorted(census.items()):
        cells = [Classification(tag="cycle", min_k=k, source="dim1")
                 if f else Classification(tag="unknown") for f in flags]
        grid = RegionGrid(
            spec=cfg.grid, class_params=cfg.class_params, cells=cells,
            provenance={
                "format": atlas.FORMAT_VERSION, "kind": "permutation_map",
                "grid": cfg.grid.to_dict(), "mu": cfg.mu, "L": cfg.L,
                "config": {"K": k, "sigma": list(images)},
                "run_config": cfg.provenance(),
            })
        stem = f"perm_K{k}_" + "-".join(str(i) for i in images)
        atlas.export_csv(grid, os.path.join(out, f"{stem}.csv"))
        atlas.render_svg(grid, os.path.join(out, f"{stem}.svg"))
        count = sum(flags)
        if count:
            nonempty += 1
        marker = " (conjectured)" if images == conj else ""
        print(f"sigma={images}{marker}: {count} feasible cells")
    print(f"permutation atlas K={k}: {nonempty} of {len(census)} "
          f"permutations have nonempty regions -> {cfg.out}/perm_K{k}_*.svg")
    return 0


def main(argv=None) -> int:
    parser = _Parser(prog="hbatlas", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("rate-map", "cycle-map", "lyapunov-map", "classify",
                 "verify-cycle", "permutation-atlas"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "classify":
            p.add_argument("--gamma", type=float, default=None)
            p.add_argument("--beta", type=float, default=None)
        if name == "verify-cycle":
            p.add_argument("certificate", help="cycle certificate JSON file")

    try:
        args = parser.parse_args(argv)
        cfg = _resolve(args, args.command)
        if args.command == "rate-map":
            return cmd_rate_map(cfg)
        if args.command == "cycle-map":
            return cmd_cycle_map(cfg)
        if args.command == "lyapunov-map":
            return cmd_lyapunov_map(cfg)
        if args.command == "classify":
            return cmd_classify(cfg, args.gamma, args.beta)
        if args.command == "verify-cycle":
            return cmd_verify_cycle(cfg, args.certificate)
        if args.command == "permutation-atlas":
            return cmd_permutation_atlas(cfg)
        raise UsageError(f"unknown command {args.command}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConflictError as exc:
        print(f"CONFLICT ABORT: {exc}", file=sys.stderr)
        print(f"lyapunov certificate: {exc.lyapunov_json}", file=sys.stderr)
        print(f"cycle certificate: {exc.cycle_json}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
