"""Run configuration: a TOML file with [problem], [grid], [solver],
[spectral], [gapmap], [bifurcate], [sweep], and [output] tables.

Unknown keys are hard errors, not warnings: a misspelled tolerance must not
silently fall back to a default.  Exactly one of [problem.potential] and
[problem.medium] must be present; referenced files must exist at parse time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ParseError, ValidationError
from .grid import PeriodicCoefficient, load_field
from .nonlinear import NonlinearitySpec
from .solver import SolveConfig

_SCHEMA = {
    "problem": {
        "dimension": int,
        "sign": str,
        "potential": {"kind": str, "value": float, "terms": list,
                      "offset": float, "file": str},
        "nonlinearity": {"kind": str, "p": float, "q": float, "theta": float,
                         "gamma": float, "h": float, "h_terms": list,
                         "h_offset": float},
        "medium": {"epsilon": float, "epsilon_terms": list,
                   "epsilon_offset": float, "chi": float, "chi_terms": list,
                   "chi_offset": float, "omega": float, "beta": float},
    },
    "grid": {"k": int, "k_list": list, "n": int},
    "solver": {"newton_tol": float, "newton_max_iter": int,
               "newton_step_floor": float, "descent_tol": float,
               "descent_max_iter": int, "armijo": float,
               "initial_step": float, "restarts": int},
    "spectral": {"n_theta": int, "n_bands": int},
    "gapmap": {"omega_min": float, "omega_max": float, "n_samples": int},
    "bifurcate": {"omega_list": list},
    "sweep": {"k_conv_tol": float},
    "output": {"directory": str, "formats": list},
}


@dataclass
class RunConfig:
    path: Path
    config_hash: str
    dim: int
    sign: str | None
    potential: PeriodicCoefficient | None
    nonlinearity: NonlinearitySpec | None
    epsilon: PeriodicCoefficient | None
    chi: PeriodicCoefficient | None
    omega: float | None
    beta: float
    grid_k: int | None
    grid_k_list: list | None
    grid_n: int
    solve: SolveConfig
    n_theta: int
    n_bands: int
    gapmap_range: tuple | None
    gapmap_samples: int
    omega_list: list | None
    k_conv_tol: float
    out_dir: Path
    formats: list = field(default_factory=lambda: ["csv", "json"])

    @property
    def is_photonic(self) -> bool:
        return self.epsilon is not None


def _check_keys(table: dict, schema: dict, prefix: str = "") -> None:
    for key, val in table.items():
        dotted = f"{prefix}{key}"
        if key not in schema:
            raise ValidationError(f"unknown config key {dotted!r}")
        want = schema[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ValidationError(f"key {dotted!r} must be a table")
            _check_keys(val, want, dotted + ".")
        elif want is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ValidationError(f"key {dotted!r} must be a number")
        elif not isinstance(val, want) or isinstance(val, bool) and want is int:
            raise ValidationError(f"key {dotted!r} must be {want.__name__}")


def _terms(raw, dim: int, dotted: str):
    out = []
    for entry in raw:
        if not isinstance(entry, list) or len(entry) != 1 + dim:
            raise ValidationError(
                f"{dotted}: each term needs [amplitude, {dim} mode integer(s)]")
        out.append((float(entry[0]), tuple(int(m) for m in entry[1:])))
    return out


def _coefficient(table: dict, dim: int, dotted: str,
                 base: Path) -> PeriodicCoefficient:
    kind = table.get("kind", "constant")
    if kind == "constant":
        return PeriodicCoefficient.constant(float(table.get("value", 0.0)), dim=dim)
    if kind == "cosine":
        if "terms" not in table:
            raise ValidationError(f"{dotted}: cosine kind needs 'terms'")
        return PeriodicCoefficient.cosine(
            _terms(table["terms"], dim, dotted), dim=dim,
            offset=float(table.get("offset", 0.0)))
    if kind == "sampled":
        if "file" not in table:
            raise ValidationError(f"{dotted}: sampled kind needs 'file'")
        fpath = (base / table["file"]).resolve()
        if not fpath.exists():
            raise ValidationError(f"{dotted}: file {fpath} does not exist")
        cell = load_field(fpath)
        if cell.grid.k != 1:
            raise ValidationError(
                f"{dotted}: unit-cell sample must have k=1, got k={cell.grid.k}")
        return PeriodicCoefficient.from_samples(cell.values)
    raise ValidationError(f"{dotted}: unknown kind {kind!r}")


def _inline_coefficient(table: dict, name: str, dim: int,
                        dotted: str) -> PeriodicCoefficient | None:
    plain, terms = table.get(name), table.get(f"{name}_terms")
    offset = float(table.get(f"{name}_offset", 0.0))
    if plain is not None and terms is not None:
        raise ValidationError(f"{dotted}: give either {name} or {name}_terms")
    if plain is not None:
        return PeriodicCoefficient.constant(float(plain), dim=dim)
    if terms is not None:
        return PeriodicCoefficient.cosine(_terms(terms, dim, dotted), dim=dim,
                                          offset=offset)
    return None


def parse_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    raw_bytes = path.read_bytes()
    try:
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from exc
    _check_keys(data, _SCHEMA)

    problem = data.get("problem", {})
    dim = int(problem.get("dimension", 1))
    if dim not in (1, 2):
        raise ValidationError("problem.dimension must be 1 or 2")
    has_potential = "potential" in problem
    has_medium = "medium" in problem
    if has_potential == has_medium:
        raise ValidationError(
            "exactly one of problem.potential and problem.medium is required")

    sign = problem.get("sign")
    if sign is not None and sign not in ("plus", "minus"):
        raise ValidationError("problem.sign must be 'plus' or 'minus'")

    potential = nonlinearity = epsilon = chi = None
    omega = None
    beta = 0.0
    if has_potential:
        potential = _coefficient(problem["potential"], dim,
                                 "problem.potential", path.parent)
        nl_table = problem.get("nonlinearity")
        if nl_table is None:
            raise ValidationError(
                "problem.nonlinearity is required with problem.potential")
        weight = _inline_coefficient(nl_table, "h", dim, "problem.nonlinearity")
        if weight is None:
            weight = PeriodicCoefficient.constant(1.0, dim=dim)
        kind = nl_table.get("kind", "power")
        if kind == "kerr":
            nonlinearity = NonlinearitySpec.kerr(weight, dim=dim)
        elif kind == "power":
            if "p" not in nl_table:
                raise ValidationError("problem.nonlinearity.p is required")
            nonlinearity = NonlinearitySpec.power(
                weight, float(nl_table["p"]),
                q=nl_table.get("q"), theta=nl_table.get("theta"),
                gamma=nl_table.get("gamma"), dim=dim)
        else:
            raise ValidationError(
                f"problem.nonlinearity.kind {kind!r} is not supported")
        if sign is None:
            sign = "plus"
    else:
        med = problem["medium"]
        epsilon = _inline_coefficient(med, "epsilon", dim, "problem.medium")
        chi = _inline_coefficient(med, "chi", dim, "problem.medium")
        if epsilon is None or chi is None:
            raise ValidationError(
                "problem.medium needs epsilon and chi (value or _terms)")
        omega = float(med["omega"]) if "omega" in med else None
        beta = float(med.get("beta", 0.0))
        if "nonlinearity" in problem:
            raise ValidationError(
                "problem.nonlinearity is derived from the medium; remove it")
        if sign is not None:
            raise ValidationError("problem.sign is derived from the medium")

    grid = data.get("grid", {})
    grid_k = grid.get("k")
    grid_k_list = grid.get("k_list")
    if grid_k is not None and grid_k_list is not None:
        raise ValidationError("give either grid.k or grid.k_list, not both")
    grid_n = int(grid.get("n", 16))

    solver_table = dict(data.get("solver", {}))
    try:
        solve = SolveConfig(**solver_table)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"solver section: {exc}") from exc

    spect = data.get("spectral", {})
    gapmap = data.get("gapmap", {})
    gap_range = None
    if "omega_min" in gapmap or "omega_max" in gapmap:
        if not ("omega_min" in gapmap and "omega_max" in gapmap):
            raise ValidationError("gapmap needs both omega_min and omega_max")
        gap_range = (float(gapmap["omega_min"]), float(gapmap["omega_max"]))

    bif = data.get("bifurcate", {})
    omega_list = bif.get("omega_list")
    if omega_list is not None:
        omega_list = [float(w) for w in omega_list]

    out = data.get("output", {})
    return RunConfig(
        path=path,
        config_hash=hashlib.sha256(raw_bytes).hexdigest(),
        dim=dim,
        sign=sign,
        potential=potential,
        nonlinearity=nonlinearity,
        epsilon=epsilon,
        chi=chi,
        omega=omega,
        beta=beta,
        grid_k=int(grid_k) if grid_k is not None else None,
        grid_k_list=[int(k) for k in grid_k_list] if grid_k_list else None,
        grid_n=grid_n,
        solve=solve,
        n_theta=int(spect.get("n_theta", 32)),
        n_bands=int(spect.get("n_bands", 6)),
        gapmap_range=gap_range,
        gapmap_samples=int(gapmap.get("n_samples", 24)),
        omega_list=omega_list,
        k_conv_tol=float(data.get("sweep", {}).get("k_conv_tol", 1e-4)),
        out_dir=Path(out.get("directory", "out")),
        formats=list(out.get("formats", ["csv", "json"])),
    )
