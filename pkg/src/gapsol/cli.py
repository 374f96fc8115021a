"""Command-line driver: band, gapmap, solve, ksweep, bifurcate, verify.

Exit codes: 0 on success, 2 when the posed problem is refused on domain
grounds (the message names the violated condition), 1 on any other failure.
Outputs are deterministic given the config and the recorded seed, and every
file carries the config hash.  The output directory can be overridden with
the GAPSOL_OUTDIR environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .action import build_context
from .config import RunConfig, parse_config
from .continuation import fit_decay_rate, k_sweep, recenter, shell_maxima
from .errors import DomainRefusal, GapsolError, ValidationError, WindowTooSmall
from .grid import dump_field, load_field, make_grid
from .photonic import (
    PhotonicMedium,
    _solve_pipeline,
    bifurcation_sweep,
    frequency_gap_map,
    reduce_to_nls,
)
from .solver import assess_field, minimize_ground_state, verify_critical_point
from .spectral import bloch_bands

COMMANDS = ("band", "gapmap", "solve", "ksweep", "bifurcate", "verify")


def _sanitize(obj):
    """JSON-ready copy: non-finite floats become 'inf'/'-inf'/'nan' strings."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def _out_dir(cfg: RunConfig) -> Path:
    override = os.environ.get("GAPSOL_OUTDIR")
    out = Path(override) if override else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: str, rows, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_json(path: Path, payload: dict, config_hash: str) -> None:
    payload = dict(payload)
    payload["config_hash"] = config_hash
    path.write_text(json.dumps(_sanitize(payload), indent=2, sort_keys=True))


def _grid_from(cfg: RunConfig):
    if cfg.grid_k is None:
        raise ValidationError("grid.k is required for this command")
    return make_grid(cfg.dim, cfg.grid_k, cfg.grid_n)


def _problem_parts(cfg: RunConfig):
    """(potential, nonlinearity, sign) from either problem form."""
    if cfg.is_photonic:
        if cfg.omega is None:
            raise ValidationError("problem.medium.omega is required here")
        medium = PhotonicMedium(epsilon=cfg.epsilon, chi=cfg.chi,
                                omega=cfg.omega, beta=cfg.beta)
        return reduce_to_nls(medium)
    return cfg.potential, cfg.nonlinearity, cfg.sign


# -- commands ---------------------------------------------------------------------

def _cmd_band(cfg: RunConfig) -> int:
    potential = _problem_parts(cfg)[0]
    bands = bloch_bands(potential, n_theta=cfg.n_theta, n_bands=cfg.n_bands,
                        n_modes=cfg.grid_n)
    out = _out_dir(cfg)
    rows = []
    for i in range(bands.thetas.shape[0]):
        theta = bands.thetas[i]
        tcols = [theta] if bands.dim == 1 else list(theta)
        for j in range(bands.n_bands):
            rows.append([*tcols, j, bands.lambdas[i, j]])
    header = "theta_0,band_index,lambda" if bands.dim == 1 \
        else "theta_0,theta_1,band_index,lambda"
    _write_csv(out / "bands.csv", header, rows, cfg.config_hash)
    _write_json(out / "bands_meta.json", {
        "intervals": [list(iv) for iv in bands.intervals],
        "n_theta": cfg.n_theta, "n_bands": bands.n_bands,
        "n_modes": bands.n_modes,
    }, cfg.config_hash)
    print(f"wrote {out / 'bands.csv'}")
    return 0


def _cmd_gapmap(cfg: RunConfig) -> int:
    if not cfg.is_photonic:
        raise ValidationError("gapmap needs a problem.medium section")
    if cfg.gapmap_range is None:
        raise ValidationError("gapmap.omega_min/omega_max are required")
    gm = frequency_gap_map(cfg.epsilon, cfg.beta, cfg.gapmap_range,
                           cfg.gapmap_samples, n_theta=cfg.n_theta,
                           n_bands=max(cfg.n_bands, 8), n_modes=cfg.grid_n)
    out = _out_dir(cfg)
    rows = [[r.omega, r.status, r.alpha_minus, r.alpha_plus] for r in gm.rows]
    _write_csv(out / "gapmap.csv", "omega,status,alpha_minus,alpha_plus",
               rows, cfg.config_hash)
    _write_json(out / "gapmap_meta.json", {
        "beta": gm.beta,
        "windows": [list(w) for w in gm.windows],
    }, cfg.config_hash)
    print(f"wrote {out / 'gapmap.csv'} ({len(gm.windows)} gap window(s))")
    return 0


def _solve_result(cfg: RunConfig, seed: int):
    grid = _grid_from(cfg)
    if cfg.is_photonic:
        if cfg.omega is None:
            raise ValidationError("problem.medium.omega is required for solve")
        medium = PhotonicMedium(epsilon=cfg.epsilon, chi=cfg.chi,
                                omega=cfg.omega, beta=cfg.beta)
        return _solve_pipeline(medium, grid, cfg.solve, seed, cfg.n_theta,
                               max(cfg.n_bands, 8), strict_decay=False)
    potential, nonlinearity, sign = _problem_parts(cfg)
    ctx = build_context(potential, nonlinearity, sign, grid,
                        n_theta=cfg.n_theta, n_bands=cfg.n_bands)
    res = minimize_ground_state(ctx, cfg.solve, seed=seed)
    u, b = recenter(res.u)
    res.u, res.recenter_b = u, b
    try:
        decay = fit_decay_rate(u, ctx.gap)
        res.metadata["decay"] = {
            "lambda": decay.lam, "prefactor": decay.prefactor,
            "window": list(decay.window), "r_squared": decay.r_squared,
            "lambda_vs_sqrt_alpha": decay.lambda_vs_sqrt_alpha,
        }
    except WindowTooSmall:
        res.metadata["decay"] = None
    return res


def _cmd_solve(cfg: RunConfig, seed: int) -> int:
    res = _solve_result(cfg, seed)
    out = _out_dir(cfg)
    dump_field(res.u, out / "solution.f64")
    meta = res.to_metadata()
    meta["alpha_minus"] = res.metadata.get("alpha_minus")
    meta["alpha_plus"] = res.metadata.get("alpha_plus")
    meta["decay"] = res.metadata.get("decay")
    meta["omega"] = res.metadata.get("omega")
    meta["beta"] = res.metadata.get("beta")
    _write_json(out / "solve_meta.json", meta, cfg.config_hash)
    if res.u.grid.dim == 1:
        xs = res.u.grid.axis_coords()
        _write_csv(out / "profile.csv", "x,u",
                   [[x, v] for x, v in zip(xs, res.u.values)], cfg.config_hash)
    maxima = shell_maxima(res.u)
    _write_csv(out / "decay.csv", "r,shell_max",
               [[r, m] for r, m in enumerate(maxima)], cfg.config_hash)
    print(f"value={res.value!r} sup={res.sup_norm!r} converged={res.converged}")
    return 0


def _cmd_ksweep(cfg: RunConfig, seed: int) -> int:
    if cfg.grid_k_list is None:
        raise ValidationError("grid.k_list is required for ksweep")
    potential, nonlinearity, sign = _problem_parts(cfg)
    records = k_sweep(potential, nonlinearity, sign, cfg.dim, cfg.grid_n,
                      cfg.grid_k_list, cfg.solve, seed=seed,
                      k_conv_tol=cfg.k_conv_tol, n_theta=cfg.n_theta,
                      n_bands=cfg.n_bands)
    out = _out_dir(cfg)
    rows = [[r.k, r.value, r.sup_norm, r.h1_norm, r.lambda_fit, r.r_squared,
             r.converged] for r in records]
    _write_csv(out / "ksweep.csv", "k,m_k,sup_norm,h1_norm,lambda,r2,converged",
               rows, cfg.config_hash)
    _write_json(out / "ksweep_meta.json", {
        "k_list": cfg.grid_k_list,
        "errors": {str(r.k): r.error for r in records if r.error},
        "sweep_converged": [r.sweep_converged for r in records],
    }, cfg.config_hash)
    final = records[-1]
    if final.result is not None:
        dump_field(final.result.u, out / "solution.f64")
    if final.error:
        print(f"sweep stopped at k={final.k}: {final.error}", file=sys.stderr)
        return 1
    print(f"final m_k={final.value!r} at k={final.k}")
    return 0


def _cmd_bifurcate(cfg: RunConfig, seed: int) -> int:
    if not cfg.is_photonic:
        raise ValidationError("bifurcate needs a problem.medium section")
    if not cfg.omega_list:
        raise ValidationError("bifurcate.omega_list is required")
    grid = _grid_from(cfg)
    sweep = bifurcation_sweep(cfg.epsilon, cfg.chi, cfg.beta, cfg.omega_list,
                              grid, cfg.solve, seed=seed, n_theta=cfg.n_theta,
                              n_bands=max(cfg.n_bands, 8))
    out = _out_dir(cfg)
    rows = [[r.omega, r.alpha, r.h1_norm, r.sup_norm, r.value, r.lambda_fit,
             r.converged] for r in sweep.records]
    _write_csv(out / "bifurcation.csv",
               "omega,alpha,h1_norm,sup_norm,value,lambda,converged",
               rows, cfg.config_hash)
    probe = sweep.probe
    _write_json(out / "bifurcation_meta.json", {
        "statuses": [r.status for r in sweep.records],
        "probe": None if probe is None else {
            "exponent": probe.exponent,
            "stderr": probe.stderr,
            "confidence_band": list(probe.confidence_band),
            "exponent_vs_alpha_plus": probe.exponent_vs_alpha_plus,
            "exponent_vs_alpha_minus": probe.exponent_vs_alpha_minus,
            "sup_monotone": probe.sup_monotone,
            "n_samples": probe.n_samples,
        },
        "probe_note": sweep.probe_note,
    }, cfg.config_hash)
    print(f"wrote {out / 'bifurcation.csv'}")
    return 0


def _cmd_verify(cfg: RunConfig, field_path: str) -> int:
    u = load_field(field_path)
    potential, nonlinearity, sign = _problem_parts(cfg)
    ctx = build_context(potential, nonlinearity, sign, u.grid,
                        n_theta=cfg.n_theta, n_bands=max(cfg.n_bands, 8))
    result = assess_field(ctx, u)
    report = verify_critical_point(ctx, result, cfg.solve)
    out = _out_dir(cfg)
    _write_json(out / "verify_report.json", {
        "checks": {k: {"ok": ok, "measured": m, "bound": b}
                   for k, (ok, m, b) in report.checks.items()},
        "passed": report.passed,
    }, cfg.config_hash)
    print("verification passed")
    return 0


def run_command(cmd: str, cfg: RunConfig, *, seed: int = 0,
                field_path: str | None = None) -> int:
    """Dispatch a command; returns the process exit status."""
    try:
        if cmd == "band":
            return _cmd_band(cfg)
        if cmd == "gapmap":
            return _cmd_gapmap(cfg)
        if cmd == "solve":
            return _cmd_solve(cfg, seed)
        if cmd == "ksweep":
            return _cmd_ksweep(cfg, seed)
        if cmd == "bifurcate":
            return _cmd_bifurcate(cfg, seed)
        if cmd == "verify":
            if field_path is None:
                print("verify needs --field PATH", file=sys.stderr)
                return 1
            return _cmd_verify(cfg, field_path)
        print(f"unknown command {cmd!r}", file=sys.stderr)
        return 1
    except DomainRefusal as exc:
        stage = f" [stage: {exc.stage}]" if exc.stage else ""
        print(f"refused{stage}: {exc}", file=sys.stderr)
        return 2
    except (GapsolError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gapsol",
        description="Ground states and gap solitons of the periodic "
                    "stationary NLS on a torus")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        if name == "solve":
            p.add_argument("--seed", type=int, default=0,
                           help="seed for the restart perturbations")
        if name == "verify":
            p.add_argument("--field", required=True,
                           help="binary field dump to verify")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except GapsolError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1
    return run_command(args.command, cfg,
                       seed=getattr(args, "seed", 0),
                       field_path=getattr(args, "field", None))


if __name__ == "__main__":
    sys.exit(main())
