"""Acceptance suite: ten pass/fail checks with pilot-calibrated thresholds.

Thresholds, sizes and runtime budgets are read from the versioned
``data/constants.json``; ``quick=True`` swaps in the reduced replica counts
stored next to the full ones.
"""
from __future__ import annotations

import filecmp
import json
import tempfile
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .drivers import DriverSpec, RngStreams, generate_brownian, generate_fbm
from .experiments import ConfigError, convergence_errors, reproduce_figures
from .haar import wavelet_coeffs
from .kernel import antiderivative, coeff_a, preset_phi
from .regularity import (
    PointwiseHolderEstimator,
    conditional_variance_check,
    fit_rate,
    gaussian_moment_constant,
    holder_norm,
    lambda_bound_statistic,
    moment_equivalence_check,
    predicted_slope,
)
from .simulator import SimConfig, draw_paths, simulate_fast, simulate_oracle, simulate_wavelet_partial

CONSTANTS_SCHEMA = "1.0"
CRITERIA = (
    "identity",
    "projection",
    "convergence",
    "pointwise",
    "conditional_variance",
    "moments",
    "lambda_bound",
    "decay",
    "determinism",
    "dichotomy",
)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    seconds: float
    max_seconds: float
    details: dict

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.number:2d} {self.name:<21s} {self.summary} "
                f"({self.seconds:.1f}s / {self.max_seconds:.0f}s)")


def load_constants(path=None) -> dict:
    """Read and check the thresholds file; any defect raises ``ConfigError``."""
    try:
        if path is None:
            text = resources.files("haarvol").joinpath("data/constants.json").read_text()
        else:
            text = Path(path).read_text()
        data = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read constants file: {exc}") from exc
    if not isinstance(data, dict) or data.get("schema_version") != CONSTANTS_SCHEMA:
        raise ConfigError(f"constants file must declare schema_version {CONSTANTS_SCHEMA!r}")
    criteria = data.get("criteria")
    if not isinstance(criteria, dict):
        raise ConfigError("constants file has no 'criteria' table")
    missing = [c for c in CRITERIA if not isinstance(criteria.get(c), dict)]
    if missing:
        raise ConfigError(f"constants file lacks criteria {missing}")
    for name in CRITERIA:
        if "max_seconds" not in criteria[name]:
            raise ConfigError(f"criterion {name!r} has no 'max_seconds'")
    return data


def _pick(c: dict, key: str, quick: bool):
    return c.get(f"quick_{key}", c[key]) if quick else c[key]


# --------------------------------------------------------------------------
# individual checks; each returns (passed, summary, details)


def check_identity(c, seed, quick):
    config = SimConfig(J=c["J"], driver=DriverSpec("fbm", 0.8), phi="constant_one", master_seed=seed)
    draw = draw_paths(config)
    Z = simulate_fast(config, draw=draw).values
    W = draw.W.restrict(c["J"]).values
    err = float(np.abs(Z - W).max())
    return err <= c["atol"], f"max|Z - W| = {err:.2e} (<= {c['atol']:.0e})", {"max_error": err}


def check_projection(c, seed, quick):
    worst = 0.0
    for phi in c["phis"]:
        for s in range(seed, seed + c["seeds"]):
            config = SimConfig(J=c["J"], driver=DriverSpec("fbm", c["hurst"]), phi=phi, master_seed=s)
            draw = draw_paths(config)
            fast = simulate_fast(config, draw=draw).values
            wav = simulate_wavelet_partial(config, config.J - 1, draw=draw).values
            worst = max(worst, float(np.abs(fast - wav).max()))
    return worst <= c["atol"], f"max discrepancy = {worst:.2e} (<= {c['atol']:.0e})", {"max_error": worst}


def check_convergence(c, seed, quick):
    J_range = list(range(c["J_first"], _pick(c, "J_last", quick) + 1))
    config = SimConfig(J=J_range[0], driver=DriverSpec("fbm", c["hurst"]), phi="sine_paper",
                       master_seed=seed, gamma_list=(c["gamma"],), replicas=_pick(c, "replicas", quick))
    errors = convergence_errors(config, J_range, [c["gamma"]])[c["gamma"]]
    fit = fit_rate(J_range, errors)
    ok = abs(fit.slope - c["target_slope"]) <= c["tolerance"]
    summary = f"slope = {fit.slope:.3f} (target {c['target_slope']} +- {c['tolerance']})"
    return ok, summary, {"slope": fit.slope, "r2": fit.r2, "errors": list(errors),
                         "predicted": predicted_slope(c["gamma"], c["hurst"] - 0.01)}


def check_pointwise(c, seed, quick):
    J = c["level"] // 2
    config = SimConfig(J=J, driver=DriverSpec("fbm", c["hurst"]), phi="sine_paper", master_seed=seed)
    n = _pick(c, "replicas", quick)
    paths = np.array([simulate_oracle(config, replica=r).values for r in range(n)])
    est = PointwiseHolderEstimator(c["t0"], (c["h_first"], c["h_last"])).fit(paths)
    ok = c["low"] <= est.exponent_ <= c["high"]
    return ok, f"mean exponent = {est.exponent_:.3f} (in [{c['low']}, {c['high']}])", {
        "mean": est.exponent_, "sd": float(est.exponents_.std())}


def check_conditional_variance(c, seed, quick):
    streams = RngStreams(seed)
    X = generate_fbm(c["hurst"], c["level"], streams.stream_X)
    dev = conditional_variance_check(X, preset_phi("sine_paper"), c["t"],
                                     _pick(c, "replicas", quick), streams.stream_W)
    return dev <= c["rtol"], f"relative deviation = {dev:.4f} (<= {c['rtol']})", {"deviation": dev}


def check_moments(c, seed, quick):
    exact = {1.0: np.sqrt(2 / np.pi), 2.0: 1.0, 4.0: 3.0}
    const_err = max(abs(gaussian_moment_constant(t) - v) for t, v in exact.items())
    g = np.random.default_rng(seed).standard_normal(c["samples"])
    dev = moment_equivalence_check(g, c["tau"])
    ok = const_err <= c["atol"] and dev < c["rtol"]
    return ok, f"constant error = {const_err:.1e}, deviation = {dev:.4f} (< {c['rtol']})", {
        "constant_error": const_err, "deviation": dev}


def check_lambda_bound(c, seed, quick):
    n = _pick(c, "seeds", quick)
    stats = []
    for s in range(seed, seed + n):
        W = generate_brownian(c["j_max"] + 1, RngStreams(s).stream_W)
        stats.append(lambda_bound_statistic(wavelet_coeffs(W, c["j_max"])))
    M = np.array(stats)
    frac = float(np.mean(M.max(axis=1) <= c["bound"]))
    j = np.arange(c["trend_first"], c["j_max"] + 1)
    trend = float(np.mean([np.polyfit(j, row[j], 1)[0] for row in M]))
    ok = frac >= c["min_pass_fraction"] and c["trend_low"] <= trend <= c["trend_high"]
    summary = (f"{int(round(frac * n))}/{n} seeds with max M_j <= {c['bound']}, "
               f"trend = {trend:+.4f}")
    return ok, summary, {"pass_fraction": frac, "trend": trend}


def decay_slope(hurst: float, level: int, seed: int, j_first: int, j_last: int) -> tuple[float, float]:
    """Fitted slope of ``log2 max_k |a_{j,k}(1)|`` and the declared ``alpha`` for one driver."""
    X = generate_fbm(hurst, level, RngStreams(seed).stream_X)
    A = antiderivative(X, preset_phi("sine_paper"))
    js = np.arange(j_first, j_last + 1)
    maxes = [np.abs(coeff_a(j, np.arange(2 ** j), 1.0, A)).max() for j in js]
    return float(np.polyfit(js, np.log2(maxes), 1)[0]), X.alpha


def check_decay(c, seed, quick):
    slope, alpha = decay_slope(c["hurst"], c["level"], seed, c["j_first"], c["j_last"])
    bound = -(alpha + 0.5) + c["tolerance"]
    # ensemble slope is reported only; the criterion is stated for one path
    n = _pick(c, "ensemble_seeds", quick)
    ens = [decay_slope(c["hurst"], c["level"], s, c["j_first"], c["j_last"])[0]
           for s in range(seed + 1, seed + 1 + n)]
    summary = (f"slope = {slope:.3f} (<= {bound:.2f}); other seeds: mean {np.mean(ens):.3f}, "
               f"{np.mean(np.array(ens) <= bound):.0%} pass")
    return slope <= bound, summary, {"slope": slope, "bound": bound, "ensemble": ens}


def check_determinism(c, seed, quick):
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "a", Path(tmp) / "b"]
        names = []
        for d in dirs:
            for rec in reproduce_figures():
                rec.write(d, "csv", {"seed": None, "config_hash": None})
                names.append(f"{rec.name}.csv")
        names = sorted(set(names))
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    ok = len(match) == len(names) == 3 and not mismatch and not errors
    return ok, f"{len(match)}/{len(names)} CSV files byte-identical", {"files": names}


def check_dichotomy(c, seed, quick):
    levels = c["levels"]
    config = SimConfig(J=c["J"], driver=DriverSpec("fbm", c["hurst"]), phi="sine_paper", master_seed=seed)
    gammas = list(c["stable_gammas"]) + [c["rough_gamma"]]
    n = _pick(c, "replicas", quick)
    norms = {g: np.zeros((n, len(levels))) for g in gammas}
    for r in range(n):
        oracle = simulate_oracle(config, replica=r)
        for i, lv in enumerate(levels):
            u = oracle.restrict(lv)
            for g in gammas:
                norms[g][r, i] = holder_norm(u, g)
    mean = {g: norms[g].mean(axis=0) for g in gammas}
    growth = {g: float(mean[g][-1] / mean[g][0]) for g in c["stable_gammas"]}
    rough = mean[c["rough_gamma"]]
    per_step = float((rough[-1] / rough[0]) ** (1.0 / (len(levels) - 1)))
    ok_stable = all(v < c["stable_max_growth"] for v in growth.values())
    ok_rough = per_step > c["rough_min_growth_per_step"]
    worst = max(growth.values())
    summary = (f"max stable growth = {worst:.3f} (< {c['stable_max_growth']}); "
               f"gamma={c['rough_gamma']} growth per 2 levels = {per_step:.3f} "
               f"(> {c['rough_min_growth_per_step']})")
    return ok_stable and ok_rough, summary, {"stable_growth": growth, "rough_growth_per_step": per_step,
                                             "stable_ok": ok_stable, "rough_ok": ok_rough}


CHECKS = {
    "identity": check_identity,
    "projection": check_projection,
    "convergence": check_convergence,
    "pointwise": check_pointwise,
    "conditional_variance": check_conditional_variance,
    "moments": check_moments,
    "lambda_bound": check_lambda_bound,
    "decay": check_decay,
    "determinism": check_determinism,
    "dichotomy": check_dichotomy,
}


def run_criterion(name: str, constants: dict | None = None, quick: bool = False,
                  seed: int | None = None) -> CriterionResult:
    constants = constants or load_constants()
    c = constants["criteria"][name]
    seed = constants.get("master_seed", 0) if seed is None else seed
    start = time.perf_counter()
    try:
        ok, summary, details = CHECKS[name](c, seed, quick)
    except KeyError as exc:
        raise ConfigError(f"constants for {name!r} lack key {exc}") from exc
    elapsed = time.perf_counter() - start
    in_time = elapsed < c["max_seconds"]
    if not in_time:
        summary += " [over time budget]"
    return CriterionResult(CRITERIA.index(name) + 1, name, bool(ok and in_time), summary,
                           elapsed, c["max_seconds"], details)


def run_acceptance(constants: dict | None = None, quick: bool = False, seed: int | None = None,
                   echo=print) -> list[CriterionResult]:
    constants = constants or load_constants()
    results = []
    if echo:
        echo("acceptance suite" + (" (quick mode: reduced replica counts)" if quick else ""))
    for name in CRITERIA:
        res = run_criterion(name, constants, quick, seed)
        if echo:
            echo(res.line())
        results.append(res)
    if echo:
        n_pass = sum(r.passed for r in results)
        echo(f"{n_pass}/{len(results)} criteria passed" + (" (quick mode)" if quick else ""))
    return results
