"""Experiment orchestration and file output shared by the CLI and validation."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .drivers import DriverSpec, DyadicGrid, ResourceLimitError, RngStreams, generate_driver
from .regularity import (
    DegenerateDataError,
    convergence_errors,
    fit_rate,
    holder_norm,
    pointwise_exponent,
    predicted_slope,
)
from .simulator import ROUTES, SimConfig, draw_paths, run_ensemble, simulate_fast

SCHEMA_VERSION = "1.0"
FIGURE_SEED = 20110
FIGURE_J = 10
FIGURE_HURST = (0.6, 0.2)

COLUMNS = {
    "simulate": ("replica", "route", "t", "value"),
    "convergence": ("gamma", "J", "mean_error", "fitted_slope", "predicted_slope", "r2"),
    "estimate": ("replica", "t0", "exponent", "stderr"),
    "estimate_norms": ("replica", "gamma", "holder_norm"),
    "figure_driver": ("t", "H", "X"),
    "figure_path": ("t", "X", "Z"),
}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


# --------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


def require(cfg: dict, *names: str) -> None:
    for name in names:
        if name not in cfg or cfg[name] is None:
            raise ConfigError(f"missing required config field '{name}'")


def driver_from(cfg) -> DriverSpec:
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("driver must be an object with a 'kind' field")
    kind = cfg["kind"]
    if kind == "bm":
        return DriverSpec("bm", hurst=0.5)
    if kind == "fbm":
        if "hurst" not in cfg:
            raise ConfigError("fbm driver needs field 'hurst'")
        return DriverSpec("fbm", hurst=float(cfg["hurst"]), method=cfg.get("method", "auto"),
                          alpha_margin=float(cfg.get("alpha_margin", 0.01)))
    if kind == "mbm":
        if "hurst_poly" not in cfg:
            raise ConfigError("mbm driver needs field 'hurst_poly'")
        return DriverSpec("mbm", hurst=None, hurst_poly=tuple(float(c) for c in cfg["hurst_poly"]),
                          method=cfg.get("method", "auto"),
                          alpha_margin=float(cfg.get("alpha_margin", 0.01)))
    raise ConfigError(f"unknown driver kind {kind!r}")


def sim_config_from(cfg: dict, J: int | None = None) -> SimConfig:
    require(cfg, "phi", "driver")
    phi = cfg["phi"]
    coeffs = None
    if isinstance(phi, dict):
        coeffs = phi.get("coeffs")
        phi = phi.get("name")
    try:
        config = SimConfig(
            J=int(cfg["J"] if J is None else J),
            driver=driver_from(cfg["driver"]),
            phi=phi,
            phi_coeffs=tuple(coeffs) if coeffs is not None else None,
            master_seed=int(cfg.get("master_seed", 0)),
            gamma_list=tuple(float(g) for g in cfg.get("gamma_list", (0.3,))),
            replicas=int(cfg.get("replicas", 1)),
        )
        config.volatility()
    except ResourceLimitError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return config


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class OutputRecord:
    name: str
    columns: tuple[str, ...]
    rows: list

    def write(self, out_dir: Path, fmt: str, meta: dict) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            path = out_dir / f"{self.name}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(self.columns)
                w.writerows([_fmt(v) for v in row] for row in self.rows)
        elif fmt == "json":
            path = out_dir / f"{self.name}.json"
            payload = {
                "schema_version": SCHEMA_VERSION,
                "columns": list(self.columns),
                "rows": [[_jsonable(v) for v in row] for row in self.rows],
            }
            path.write_text(json.dumps(payload, separators=(",", ":")) + "\n")
        else:
            raise ConfigError(f"unknown output format {fmt!r}")
        meta_path = out_dir / f"{self.name}.meta.json"
        full_meta = {
            "schema_version": SCHEMA_VERSION,
            "library_version": __version__,
            "columns": list(self.columns),
            "n_rows": len(self.rows),
            **meta,
        }
        meta_path.write_text(json.dumps(full_meta, indent=2, sort_keys=True) + "\n")
        return [path, meta_path]


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


# --------------------------------------------------------------------------
# commands


def simulate(cfg: dict) -> list[OutputRecord]:
    require(cfg, "J", "phi", "driver")
    config = sim_config_from(cfg)
    routes = tuple(cfg.get("routes", ("fast", "oracle")))
    bad = set(routes) - set(ROUTES)
    if bad:
        raise ConfigError(f"unknown routes {sorted(bad)}")
    full_oracle = bool(cfg.get("oracle_full_grid", False))
    rows = []
    for res in run_ensemble(config, routes, cfg.get("J_partial")):
        for route in routes:
            path = res.route(route)
            values = path.values
            grid = path.grid
            if route == "oracle" and not full_oracle:
                values = path.restrict(config.J)
                grid = DyadicGrid(config.J)
            rows.extend((res.replica, route, t, v) for t, v in zip(grid.points, values))
    return [OutputRecord("path", COLUMNS["simulate"], rows)]


def _range(cfg: dict, name: str) -> list[int]:
    require(cfg, name)
    r = cfg[name]
    if not isinstance(r, (list, tuple)) or len(r) == 0:
        raise ConfigError(f"config field '{name}' must be a non-empty [first, last] range")
    if len(r) == 2:
        lo, hi = int(r[0]), int(r[1])
        values = list(range(lo, hi + 1))
    else:
        values = [int(v) for v in r]
    if len(values) < 2:
        raise ConfigError(f"config field '{name}' needs at least two levels")
    return values


def declared_alpha(config: SimConfig) -> float:
    X = generate_driver(config.driver, 2, RngStreams(0).stream_X)
    return X.alpha


def convergence(cfg: dict) -> list[OutputRecord]:
    require(cfg, "driver", "phi", "gamma_list", "J_range")
    J_range = _range(cfg, "J_range")
    if min(J_range) < 1 or 2 * max(J_range) > 26:
        raise ResourceLimitError(f"J_range {J_range} exceeds the simulation limits")
    config = sim_config_from({**cfg, "J": min(J_range), "replicas": cfg.get("replicas", 20)})
    gammas = list(config.gamma_list)
    if not gammas:
        raise ConfigError("gamma_list is empty")
    if config.replicas < 5:
        raise ConfigError(f"convergence needs at least 5 replicas, got {config.replicas}")
    alpha = declared_alpha(config)
    errors = convergence_errors(config, J_range, gammas, cfg.get("eval_grid", "fine"))
    rows = []
    for g in gammas:
        fit = fit_rate(J_range, errors[g])
        pred = predicted_slope(g, alpha) if math.isfinite(alpha) else float("nan")
        rows.extend((g, J, e, fit.slope, pred, fit.r2) for J, e in zip(J_range, errors[g]))
    return [OutputRecord("rates", COLUMNS["convergence"], rows)]


def _read_paths(path, route: str) -> dict[int, np.ndarray]:
    out: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(COLUMNS["simulate"]) - set(reader.fieldnames):
            raise ConfigError(f"{path} does not have the columns {COLUMNS['simulate']}")
        for row in reader:
            if row["route"] == route:
                out.setdefault(int(row["replica"]), []).append(float(row["value"]))
    if not out:
        raise ConfigError(f"{path} holds no rows for route {route!r}")
    return {r: np.asarray(v) for r, v in sorted(out.items())}


def estimate(cfg: dict, input_path=None) -> list[OutputRecord]:
    t0_list = [float(t) for t in cfg.get("t0", [0.5])]
    lo, hi = cfg.get("h_levels", [3, 10])
    gammas = [float(g) for g in cfg.get("gamma_list", [0.1, 0.2, 0.3, 0.4])]
    route = cfg.get("route", "oracle")
    if input_path is not None:
        paths = _read_paths(input_path, route)
    else:
        require(cfg, "J", "phi", "driver")
        config = sim_config_from(cfg)
        routes = (route,)
        paths = {res.replica: res.route(route).values for res in run_ensemble(config, routes)}
    rows, norm_rows = [], []
    for r, u in paths.items():
        for t0 in t0_list:
            try:
                est, se = pointwise_exponent(u, t0, range(int(lo), int(hi) + 1))
            except DegenerateDataError:
                est, se = float("nan"), float("nan")
            rows.append((r, t0, est, se))
        norm_rows.extend((r, g, holder_norm(u, g)) for g in gammas)
    return [OutputRecord("estimates", COLUMNS["estimate"], rows),
            OutputRecord("norms", COLUMNS["estimate_norms"], norm_rows)]


def reproduce_figures(seed: int = FIGURE_SEED, J: int = FIGURE_J) -> list[OutputRecord]:
    """Driver path and two coupled log-price paths of the demonstration setup.

    The mBm driver has ``H(s) = 0.6 + 0.2 s``; the two ``Z`` paths use
    ``Phi(x) = 0.5 + 0.5 x`` and ``Phi(x) = sin x`` on the same draw.
    """
    driver = DriverSpec("mbm", hurst=None, hurst_poly=FIGURE_HURST)
    records = []
    X_out = None
    for name, phi in (("figure2_affine", "affine_paper"), ("figure2_sine", "sine_paper")):
        config = SimConfig(J=J, driver=driver, phi=phi, master_seed=seed)
        draw = draw_paths(config)
        Z = simulate_fast(config, draw=draw)
        X = draw.X.restrict(J)
        if X_out is None:
            X_out = X
            records.append(OutputRecord("figure1_driver", COLUMNS["figure_driver"],
                                        list(zip(X.t, X.hurst, X.values))))
        records.append(OutputRecord(name, COLUMNS["figure_path"], list(zip(Z.t, X.values, Z.values))))
    return records
