"""Command-line front end: scenario evaluation, sweeps, optimization runs,
decoy comparisons, and figure-data export.

Every run writes one or more CSV files plus a JSON manifest that echoes the
fully resolved configuration; re-running a command with --config pointed at
the manifest reproduces the CSVs byte for byte.  Values in CSVs use
scientific notation with 12 significant digits.  Exit codes: 0 success, 2
invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .detectors import DEFAULT_CONSTRAINT, DetectorConstraint
from .errors import ConstraintViolationError
from .fock import TruncationPolicy
from .optimize import (
    OptimumPoint,
    Scenario,
    SweepRow,
    decoy_optimal_rate,
    es_optimal_rate,
    evaluate,
    find_crossover,
    optimize_chi,
    optimize_joint,
    sweep,
)
from .rates import (
    KAPPA_DEFAULT,
    NU_DEFAULT,
    decoy_inputs,
    decoy_rate_report,
)

SCHEMA_VERSION = 1
WORKERS_ENV_VAR = "SWAPKD_WORKERS"

ROW_COLUMNS = [
    "alpha_d_db",
    "chi",
    "eta0",
    "p_dc",
    "kappa",
    "n_max_used",
    "converged",
    "visibility",
    "qber_direct",
    "qber_from_v",
    "r_sift",
    "r_sec_raw",
    "r_sec",
    "log10_r_sec",
    "herald_probability",
    "coincidence_probability",
    "error",
]

OPTIMIZE_COLUMNS = [
    "alpha_d_db",
    "chi_opt",
    "eta0_opt",
    "p_dc_at_opt",
    "r_sec_at_opt",
    "qber_at_opt",
    "converged",
    "positive",
    "guard_flag",
]

COMPARE_COLUMNS = [
    "alpha_d_db",
    "eta0",
    "p_dc",
    "chi_used",
    "r_es",
    "log10_r_es",
    "mu_used",
    "r_decoy",
    "log10_r_decoy",
]

DECOY_COLUMNS = [
    "alpha_d_db",
    "eta0",
    "p_dc",
    "mu",
    "nu",
    "q_mu",
    "e_mu",
    "y1_lower",
    "q1_lower",
    "e1_upper",
    "r_raw",
    "r_sec",
    "log10_r_sec",
]

CROSSOVER_COLUMNS = ["alpha_d_db", "r_es", "r_decoy"]


class ConfigError(ValueError):
    """Raised for unknown keys, bad values, or contradictory settings."""


# ---------------------------------------------------------------------------
# formatting and file output


def _fmt(value) -> str:
    """One CSV cell: floats in 12-significant-digit scientific notation."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return "%.11e" % value
    return str(value).replace(",", ";")


def _write_csv(path: str, columns: Sequence[str], rows: Sequence[Dict]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in columns))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _log10_or_none(rate: float) -> Optional[float]:
    return math.log10(rate) if rate > 0.0 else None


def _report_row(sr: SweepRow) -> Dict:
    s = sr.scenario
    row: Dict = {
        "alpha_d_db": s.alpha_d_db,
        "chi": s.chi,
        "eta0": s.eta0,
        "kappa": s.kappa,
        "error": sr.error,
    }
    try:
        row["p_dc"] = s.resolved_p_dc
    except ConstraintViolationError:
        row["p_dc"] = None
    r = sr.report
    if r is not None:
        row.update(
            n_max_used=r.n_max_used,
            converged=r.converged,
            visibility=r.visibility,
            qber_direct=r.qber,
            qber_from_v=r.qber_from_v,
            r_sift=r.r_sift,
            r_sec_raw=r.r_sec_raw,
            r_sec=r.r_sec,
            log10_r_sec=_log10_or_none(r.r_sec),
            herald_probability=r.herald_probability,
            coincidence_probability=r.coincidence_probability,
        )
    return row


def _optimum_row(pt: OptimumPoint) -> Dict:
    return {
        "alpha_d_db": pt.alpha_d_db,
        "chi_opt": pt.chi_opt,
        "eta0_opt": pt.eta0_opt,
        "p_dc_at_opt": pt.p_dc_at_opt,
        "r_sec_at_opt": pt.r_sec_at_opt,
        "qber_at_opt": pt.qber_at_opt,
        "converged": pt.converged,
        "positive": pt.positive,
        "guard_flag": pt.guard_flag,
    }


def _write_manifest(
    path: str,
    command: str,
    config: Dict,
    outputs: List[str],
    wall_time_s: float,
    results: Optional[Dict] = None,
) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "tool": "swapkd",
        "version": __version__,
        "command": command,
        "config": config,
        "outputs": outputs,
        "wall_time_s": wall_time_s,
    }
    if results is not None:
        payload["results"] = results
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# grid parsing and config resolution

GridLike = Union[str, Sequence[float], float, int]


def parse_grid(spec: GridLike) -> List[float]:
    """Turn a grid description into an explicit list of floats.

    Accepted forms: a list of numbers, a single number, "v1,v2,v3",
    "start:stop:step" (stop included when it lands on the step lattice), and
    "start:stop:n:log" / "start:stop:n:lin" for n log- or linearly spaced
    points.
    """
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        values = [float(v) for v in spec]
        if not values:
            raise ConfigError("empty grid")
        return values
    text = str(spec).strip()
    if not text:
        raise ConfigError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) == 3:
            start, stop, step = (float(p) for p in parts)
            if step <= 0.0 or stop < start:
                raise ConfigError(f"bad grid {text!r}: need start <= stop, step > 0")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + step * i for i in range(count)]
        if len(parts) == 4:
            start, stop = float(parts[0]), float(parts[1])
            n = int(parts[2])
            kind = parts[3].lower()
            if n < 1:
                raise ConfigError(f"bad grid {text!r}: need at least one point")
            if kind == "log":
                if start <= 0.0 or stop <= 0.0:
                    raise ConfigError(f"bad grid {text!r}: log spacing needs positive bounds")
                return list(np.logspace(math.log10(start), math.log10(stop), n))
            if kind == "lin":
                return list(np.linspace(start, stop, n))
            raise ConfigError(f"bad grid {text!r}: spacing must be 'log' or 'lin'")
        raise ConfigError(f"bad grid {text!r}: expected 3 or 4 ':'-separated fields")
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _load_config_file(path: str, command: str) -> Dict:
    with open(path) as fh:
        loaded = json.load(fh)
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path!r} must hold a JSON object")
    if "schema_version" in loaded and "config" in loaded:
        if loaded.get("command") != command:
            raise ConfigError(
                f"manifest {path!r} was written by command "
                f"{loaded.get('command')!r}, not {command!r}"
            )
        loaded = loaded["config"]
    return loaded


def _resolve(args: argparse.Namespace, defaults: Dict) -> Dict:
    """Merge defaults, config file, and explicit flags (flags win)."""
    config = dict(defaults)
    if getattr(args, "config", None):
        loaded = _load_config_file(args.config, args.command)
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        config.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def _resolve_pdc_mode(config: Dict, require_eta0: bool = True) -> Tuple[Optional[float], Optional[DetectorConstraint]]:
    """Translate the p_dc/constraint pair of config keys into Scenario inputs."""
    use_constraint = bool(config.get("constraint"))
    p_dc = config.get("p_dc")
    if use_constraint and p_dc is not None:
        raise ConfigError("give either p_dc or constraint, not both")
    if not use_constraint and p_dc is None:
        raise ConfigError("one of p_dc or constraint is required")
    if require_eta0 and config.get("eta0") is None:
        raise ConfigError("eta0 is required")
    if use_constraint:
        return None, DetectorConstraint(
            a=config.get("constraint_a", DEFAULT_CONSTRAINT.a),
            b=config.get("constraint_b", DEFAULT_CONSTRAINT.b),
        )
    return float(p_dc), None


def _policy(config: Dict) -> TruncationPolicy:
    return TruncationPolicy(
        n_max=int(config["n_max"]), convergence_tol=float(config["convergence_tol"])
    )


def _workers(config: Dict) -> int:
    if config.get("workers") is not None:
        return max(1, int(config["workers"]))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _out_path(config: Dict, name: str) -> str:
    out_dir = config.get("output_dir") or "."
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


# ---------------------------------------------------------------------------
# commands

_EVALUATE_DEFAULTS: Dict = {
    "chi": None,
    "eta0": None,
    "alpha_d": None,
    "p_dc": None,
    "constraint": False,
    "constraint_a": DEFAULT_CONSTRAINT.a,
    "constraint_b": DEFAULT_CONSTRAINT.b,
    "kappa": KAPPA_DEFAULT,
    "n_max": 4,
    "convergence_tol": 1e-4,
    "output_dir": ".",
    "output_prefix": "evaluate",
}


def _cmd_evaluate(args: argparse.Namespace) -> int:
    t0 = time.time()
    config = _resolve(args, _EVALUATE_DEFAULTS)
    for key in ("chi", "eta0", "alpha_d"):
        if config[key] is None:
            raise ConfigError(f"{key} is required")
    p_dc, constraint = _resolve_pdc_mode(config)
    scenario = Scenario(
        alpha_d_db=float(config["alpha_d"]),
        chi=float(config["chi"]),
        eta0=float(config["eta0"]),
        p_dc=p_dc,
        constraint=constraint,
        kappa=float(config["kappa"]),
        policy=_policy(config),
    )
    report = evaluate(scenario)
    row = _report_row(SweepRow(scenario=scenario, report=report))
    csv_path = _out_path(config, config["output_prefix"] + ".csv")
    _write_csv(csv_path, ROW_COLUMNS, [row])
    manifest_path = _out_path(config, config["output_prefix"] + "_manifest.json")
    _write_manifest(
        manifest_path,
        "evaluate",
        config,
        [os.path.basename(csv_path)],
        time.time() - t0,
        results={"r_sec": report.r_sec, "qber": report.qber, "visibility": report.visibility},
    )
    return 0


_SWEEP_DEFAULTS: Dict = {
    "chi_grid": None,
    "eta0_grid": None,
    "alpha_d_grid": None,
    "p_dc": None,
    "constraint": False,
    "constraint_a": DEFAULT_CONSTRAINT.a,
    "constraint_b": DEFAULT_CONSTRAINT.b,
    "kappa": KAPPA_DEFAULT,
    "n_max": 4,
    "convergence_tol": 1e-4,
    "workers": None,
    "output_dir": ".",
    "output_prefix": "sweep",
}


def _cmd_sweep(args: argparse.Namespace) -> int:
    t0 = time.time()
    config = _resolve(args, _SWEEP_DEFAULTS)
    for key in ("chi_grid", "eta0_grid", "alpha_d_grid"):
        if config[key] is None:
            raise ConfigError(f"{key} is required")
    p_dc, constraint = _resolve_pdc_mode(config, require_eta0=False)
    alpha_values = parse_grid(config["alpha_d_grid"])
    eta_values = parse_grid(config["eta0_grid"])
    chi_values = parse_grid(config["chi_grid"])
    config["alpha_d_grid"] = alpha_values
    config["eta0_grid"] = eta_values
    config["chi_grid"] = chi_values
    policy = _policy(config)
    scenarios = [
        Scenario(
            alpha_d_db=a, chi=c, eta0=e, p_dc=p_dc, constraint=constraint,
            kappa=float(config["kappa"]), policy=policy,
        )
        for a in alpha_values
        for e in eta_values
        for c in chi_values
    ]
    rows = [_report_row(sr) for sr in sweep(scenarios, workers=_workers(config))]
    csv_path = _out_path(config, config["output_prefix"] + ".csv")
    _write_csv(csv_path, ROW_COLUMNS, rows)
    manifest_path = _out_path(config, config["output_prefix"] + "_manifest.json")
    n_failed = sum(1 for r in rows if r.get("error"))
    _write_manifest(
        manifest_path,
        "sweep",
        config,
        [os.path.basename(csv_path)],
        time.time() - t0,
        results={"points": len(rows), "failed_points": n_failed},
    )
    return 0


_OPTIMIZE_DEFAULTS: Dict = {
    "alpha_d_grid": None,
    "eta0": None,
    "p_dc": None,
    "constraint": False,
    "constraint_a": DEFAULT_CONSTRAINT.a,
    "constraint_b": DEFAULT_CONSTRAINT.b,
    "kappa": KAPPA_DEFAULT,
    "n_max": 4,
    "convergence_tol": 1e-4,
    "workers": None,
    "output_dir": ".",
    "output_prefix": "optimize",
}


def _optimize_one_alpha(task: Tuple) -> OptimumPoint:
    alpha, eta0, p_dc, constraint, kappa, policy = task
    if eta0 is None:
        return optimize_joint(alpha, constraint=constraint, kappa=kappa, policy=policy)
    return optimize_chi(
        alpha, eta0, p_dc=p_dc, constraint=constraint, kappa=kappa, policy=policy
    )


def _cmd_optimize(args: argparse.Namespace) -> int:
    t0 = time.time()
    config = _resolve(args, _OPTIMIZE_DEFAULTS)
    if config["alpha_d_grid"] is None:
        raise ConfigError("alpha_d_grid is required")
    alpha_values = parse_grid(config["alpha_d_grid"])
    config["alpha_d_grid"] = alpha_values
    eta0 = config["eta0"]
    if eta0 is None:
        # joint (chi, eta0) optimization needs the dark-count constraint
        if not config.get("constraint"):
            raise ConfigError("joint optimization requires constraint mode (or give eta0)")
        p_dc, constraint = None, DetectorConstraint(
            a=config["constraint_a"], b=config["constraint_b"]
        )
    else:
        eta0 = float(eta0)
        p_dc, constraint = _resolve_pdc_mode(config)
    policy = _policy(config)
    kappa = float(config["kappa"])
    tasks = [(a, eta0, p_dc, constraint, kappa, policy) for a in alpha_values]
    workers = _workers(config)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_optimize_one_alpha, tasks))
    else:
        points = [_optimize_one_alpha(t) for t in tasks]
    rows = [_optimum_row(pt) for pt in points]
    csv_path = _out_path(config, config["output_prefix"] + ".csv")
    _write_csv(csv_path, OPTIMIZE_COLUMNS, rows)
    manifest_path = _out_path(config, config["output_prefix"] + "_manifest.json")
    _write_manifest(
        manifest_path,
        "optimize",
        config,
        [os.path.basename(csv_path)],
        time.time() - t0,
        results={"points": len(rows)},
    )
    return 0


_COMPARE_DEFAULTS: Dict = {
    "alpha_d_grid": None,
    "eta0": None,
    "p_dc": None,
    "nu": NU_DEFAULT,
    "mu": None,
    "chi": None,
    "kappa": KAPPA_DEFAULT,
    "n_max": 4,
    "convergence_tol": 1e-4,
    "output_dir": ".",
    "output_prefix": "compare_decoy",
}


def _compare_rows(
    alpha_values: Sequence[float],
    eta0: float,
    p_dc: float,
    nu: float,
    kappa: float,
    policy: TruncationPolicy,
    fixed_mu: Optional[float],
    fixed_chi: Optional[float],
) -> List[Dict]:
    rows = []
    for alpha in alpha_values:
        if fixed_chi is None:
            chi_used, r_es = es_optimal_rate(alpha, eta0, p_dc, kappa=kappa, policy=policy)
        else:
            chi_used = fixed_chi
            s = Scenario(
                alpha_d_db=alpha, chi=fixed_chi, eta0=eta0, p_dc=p_dc,
                kappa=kappa, policy=policy,
            )
            r_es = evaluate(s, with_visibility=False, escalate=False).r_sec
        if fixed_mu is None:
            mu_used, r_dk = decoy_optimal_rate(alpha, eta0, p_dc, nu=nu, kappa=kappa)
        else:
            mu_used = fixed_mu
            r_dk = decoy_rate_report(
                decoy_inputs(fixed_mu, eta0, alpha, p_dc, nu=nu, kappa=kappa)
            ).r_sec
        rows.append(
            {
                "alpha_d_db": alpha,
                "eta0": eta0,
                "p_dc": p_dc,
                "chi_used": chi_used,
                "r_es": r_es,
                "log10_r_es": _log10_or_none(r_es),
                "mu_used": mu_used,
                "r_decoy": r_dk,
                "log10_r_decoy": _log10_or_none(r_dk),
            }
        )
    return rows


def _cmd_compare_decoy(args: argparse.Namespace) -> int:
    t0 = time.time()
    config = _resolve(args, _COMPARE_DEFAULTS)
    for key in ("alpha_d_grid", "eta0", "p_dc"):
        if config[key] is None:
            raise ConfigError(f"{key} is required")
    alpha_values = parse_grid(config["alpha_d_grid"])
    config["alpha_d_grid"] = alpha_values
    rows = _compare_rows(
        alpha_values,
        float(config["eta0"]),
        float(config["p_dc"]),
        float(config["nu"]),
        float(config["kappa"]),
        _policy(config),
        config["mu"],
        config["chi"],
    )
    csv_path = _out_path(config, config["output_prefix"] + ".csv")
    _write_csv(csv_path, COMPARE_COLUMNS, rows)
    manifest_path = _out_path(config, config["output_prefix"] + "_manifest.json")
    _write_manifest(
        manifest_path,
        "compare-decoy",
        config,
        [os.path.basename(csv_path)],
        time.time() - t0,
        results={"points": len(rows)},
    )
    return 0


_CROSSOVER_DEFAULTS: Dict = {
    "eta0": None,
    "p_dc": None,
    "alpha_min": 0.0,
    "alpha_max": 60.0,
    "step": 2.5,
    "nu": NU_DEFAULT,
    "kappa": KAPPA_DEFAULT,
    "n_max": 4,
    "convergence_tol": 1e-4,
    "output_dir": ".",
    "output_prefix": "crossover",
}


def _cmd_crossover(args: argparse.Namespace) -> int:
    t0 = time.time()
    config = _resolve(args, _CROSSOVER_DEFAULTS)
    for key in ("eta0", "p_dc"):
        if config[key] is None:
            raise ConfigError(f"{key} is required")
    eta0 = float(config["eta0"])
    p_dc = float(config["p_dc"])
    kappa = float(config["kappa"])
    nu = float(config["nu"])
    policy = _policy(config)
    alpha_star = find_crossover(
        eta0,
        p_dc,
        alpha_lo=float(config["alpha_min"]),
        alpha_hi=float(config["alpha_max"]),
        step=float(config["step"]),
        kappa=kappa,
        policy=policy,
        nu=nu,
    )
    alphas = parse_grid(f"{config['alpha_min']}:{config['alpha_max']}:{config['step']}")
    rows = []
    for alpha in alphas:
        r_es = es_optimal_rate(alpha, eta0, p_dc, kappa=kappa, policy=policy)[1]
        r_dk = decoy_optimal_rate(alpha, eta0, p_dc, nu=nu, kappa=kappa)[1]
        rows.append({"alpha_d_db": alpha, "r_es": r_es, "r_decoy": r_dk})
    csv_path = _out_path(config, config["output_prefix"] + ".csv")
    _write_csv(csv_path, CROSSOVER_COLUMNS, rows)
    manifest_path = _out_path(config, config["output_prefix"] + "_manifest.json")
    _write_manifest(
        manifest_path,
        "crossover",
        config,
        [os.path.basename(csv_path)],
        time.time() - t0,
        results={"alpha_crossover": alpha_star},
    )
    return 0


# ---------------------------------------------------------------------------
# figure data

_FIGURE_DEFAULTS: Dict = {
    "figure": None,
    "variant": None,
    "alpha_d_grid": None,
    "chi_grid": None,
    "workers": None,
    "n_max": 4,
    "convergence_tol": 1e-4,
    "output_dir": ".",
}

_CHI_SCAN_FULL = "1e-4:0.3:25:log"
_CHI_SCAN_ZOOM = "1e-4:1e-2:25:log"
_ALPHA_SCAN = "0:50:2.5"
_ALPHA_SCAN_LONG = "0:60:2.5"

# chi-scan QBER curves at fixed (eta0, constraint), one file per alpha*d
_FIG3_VARIANTS = {
    "a": (0.1, _CHI_SCAN_ZOOM),
    "b": (0.1, _CHI_SCAN_FULL),
    "c": (0.3, _CHI_SCAN_ZOOM),
    "d": (0.3, _CHI_SCAN_FULL),
}
_FIG3_ALPHAS = (0.0, 5.0, 10.0, 25.0, 50.0)

# alpha-scan QBER curves, one file per chi
_FIG4_VARIANTS = {"a": 0.1, "b": 0.3}
_FIG4_CHIS = (1e-4, 1e-3, 1e-2, 0.1, 0.2)

# chi-scan secret-rate curves, one file per alpha*d
_FIG5_VARIANTS = {"a": 0.1, "b": 0.3}

# decoy-vs-swap comparison at eta0 = 0.2, per-distance optimal brightness
_FIG7_VARIANTS = {"a": 1.8e-5, "b": 1e-6, "c": 1e-10}

_FIG8_PDC = 1e-12
_FIG8A_ETA0 = 0.2
_FIG8A_MUS = (0.8, 0.4)
_FIG8A_CHIS = (0.174, 0.172, 0.12)
_FIG8B_MU = 0.7
_FIG8B_CHI = 0.12
_FIG8B_ETAS = (0.9, 0.1)


def _num_label(value: float) -> str:
    return ("%g" % value).replace("-0", "-").replace("+", "")


def _fig_sweep_files(
    config: Dict,
    prefix: str,
    curves: Sequence[Tuple[str, List[Scenario]]],
    workers: int,
) -> List[str]:
    """Evaluate one scenario list per curve and write one CSV per curve."""
    outputs = []
    for label, scenarios in curves:
        rows = [_report_row(sr) for sr in sweep(scenarios, workers=workers)]
        path = _out_path(config, f"{prefix}_{label}.csv")
        _write_csv(path, ROW_COLUMNS, rows)
        outputs.append(os.path.basename(path))
    return outputs


def _default_variants(figure: str) -> Tuple[str, ...]:
    return {
        "fig3": tuple(_FIG3_VARIANTS),
        "fig4": tuple(_FIG4_VARIANTS),
        "fig5": tuple(_FIG5_VARIANTS),
        "fig6": ("",),
        "fig7": tuple(_FIG7_VARIANTS),
        "fig8": ("a", "b"),
    }[figure]


def _emit_figure_variant(config: Dict, figure: str, variant: str, workers: int) -> List[str]:
    policy = _policy(config)
    kappa = KAPPA_DEFAULT
    prefix = figure + variant

    if figure == "fig3" or figure == "fig5":
        variants = _FIG3_VARIANTS if figure == "fig3" else {
            k: (v, _CHI_SCAN_FULL) for k, v in _FIG5_VARIANTS.items()
        }
        if variant not in variants:
            raise ConfigError(f"unknown variant {variant!r} for {figure}")
        eta0, default_chi = variants[variant]
        chi_values = parse_grid(config["chi_grid"] or default_chi)
        alpha_values = (
            parse_grid(config["alpha_d_grid"]) if config["alpha_d_grid"] else list(_FIG3_ALPHAS)
        )
        curves = []
        for alpha in alpha_values:
            scenarios = [
                Scenario(
                    alpha_d_db=alpha, chi=c, eta0=eta0,
                    constraint=DEFAULT_CONSTRAINT, kappa=kappa, policy=policy,
                )
                for c in chi_values
            ]
            curves.append((f"ad{_num_label(alpha)}", scenarios))
        return _fig_sweep_files(config, prefix, curves, workers)

    if figure == "fig4":
        if variant not in _FIG4_VARIANTS:
            raise ConfigError(f"unknown variant {variant!r} for fig4")
        eta0 = _FIG4_VARIANTS[variant]
        alpha_values = parse_grid(config["alpha_d_grid"] or _ALPHA_SCAN)
        chi_values = parse_grid(config["chi_grid"]) if config["chi_grid"] else list(_FIG4_CHIS)
        curves = []
        for chi in chi_values:
            scenarios = [
                Scenario(
                    alpha_d_db=a, chi=chi, eta0=eta0,
                    constraint=DEFAULT_CONSTRAINT, kappa=kappa, policy=policy,
                )
                for a in alpha_values
            ]
            curves.append((f"chi{_num_label(chi)}", scenarios))
        return _fig_sweep_files(config, prefix, curves, workers)

    if figure == "fig6":
        alpha_values = parse_grid(config["alpha_d_grid"] or _ALPHA_SCAN)
        tasks = [(a, None, None, DEFAULT_CONSTRAINT, kappa, policy) for a in alpha_values]
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                points = list(pool.map(_optimize_one_alpha, tasks))
        else:
            points = [_optimize_one_alpha(t) for t in tasks]
        path = _out_path(config, "fig6_optima.csv")
        _write_csv(path, OPTIMIZE_COLUMNS, [_optimum_row(pt) for pt in points])
        return [os.path.basename(path)]

    if figure == "fig7":
        if variant not in _FIG7_VARIANTS:
            raise ConfigError(f"unknown variant {variant!r} for fig7")
        p_dc = _FIG7_VARIANTS[variant]
        alpha_values = parse_grid(config["alpha_d_grid"] or _ALPHA_SCAN_LONG)
        rows = _compare_rows(
            alpha_values, 0.2, p_dc, NU_DEFAULT, kappa, policy, None, None
        )
        path = _out_path(config, f"{prefix}_es_vs_decoy.csv")
        _write_csv(path, COMPARE_COLUMNS, rows)
        return [os.path.basename(path)]

    if figure == "fig8":
        alpha_values = parse_grid(config["alpha_d_grid"] or _ALPHA_SCAN_LONG)
        outputs = []
        if variant == "a":
            for mu in _FIG8A_MUS:
                rows = []
                for alpha in alpha_values:
                    rep = decoy_rate_report(
                        decoy_inputs(mu, _FIG8A_ETA0, alpha, _FIG8_PDC, kappa=kappa)
                    )
                    rows.append(_decoy_row(alpha, _FIG8A_ETA0, _FIG8_PDC, rep))
                path = _out_path(config, f"{prefix}_decoy_mu{_num_label(mu)}.csv")
                _write_csv(path, DECOY_COLUMNS, rows)
                outputs.append(os.path.basename(path))
            for chi in _FIG8A_CHIS:
                scenarios = [
                    Scenario(
                        alpha_d_db=a, chi=chi, eta0=_FIG8A_ETA0, p_dc=_FIG8_PDC,
                        kappa=kappa, policy=policy,
                    )
                    for a in alpha_values
                ]
                rows = [_report_row(sr) for sr in sweep(scenarios, workers=workers)]
                path = _out_path(config, f"{prefix}_es_chi{_num_label(chi)}.csv")
                _write_csv(path, ROW_COLUMNS, rows)
                outputs.append(os.path.basename(path))
            return outputs
        if variant == "b":
            for eta0 in _FIG8B_ETAS:
                rows = []
                for alpha in alpha_values:
                    rep = decoy_rate_report(
                        decoy_inputs(_FIG8B_MU, eta0, alpha, _FIG8_PDC, kappa=kappa)
                    )
                    rows.append(_decoy_row(alpha, eta0, _FIG8_PDC, rep))
                path = _out_path(config, f"{prefix}_decoy_eta{_num_label(eta0)}.csv")
                _write_csv(path, DECOY_COLUMNS, rows)
                outputs.append(os.path.basename(path))
                scenarios = [
                    Scenario(
                        alpha_d_db=a, chi=_FIG8B_CHI, eta0=eta0, p_dc=_FIG8_PDC,
                        kappa=kappa, policy=policy,
                    )
                    for a in alpha_values
                ]
                es_rows = [_report_row(sr) for sr in sweep(scenarios, workers=workers)]
                path = _out_path(config, f"{prefix}_es_eta{_num_label(eta0)}.csv")
                _write_csv(path, ROW_COLUMNS, es_rows)
                outputs.append(os.path.basename(path))
            return outputs
        raise ConfigError(f"unknown variant {variant!r} for fig8")

    raise ConfigError(f"unknown figure {figure!r}")


def _decoy_row(alpha: float, eta0: float, p_dc: float, rep) -> Dict:
    return {
        "alpha_d_db": alpha,
        "eta0": eta0,
        "p_dc": p_dc,
        "mu": rep.inputs.mu,
        "nu": rep.inputs.nu,
        "q_mu": rep.q_mu,
        "e_mu": rep.e_mu,
        "y1_lower": rep.y1_lower,
        "q1_lower": rep.q1_lower,
        "e1_upper": rep.e1_upper,
        "r_raw": rep.r_raw,
        "r_sec": rep.r_sec,
        "log10_r_sec": _log10_or_none(rep.r_sec),
    }


def _cmd_figure_data(args: argparse.Namespace) -> int:
    t0 = time.time()
    config = _resolve(args, _FIGURE_DEFAULTS)
    figure = config["figure"]
    if figure not in ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8"):
        raise ConfigError(f"unknown figure {figure!r}")
    variants = (config["variant"],) if config["variant"] else _default_variants(figure)
    workers = _workers(config)
    outputs: List[str] = []
    for variant in variants:
        outputs.extend(_emit_figure_variant(config, figure, variant or "", workers))
    manifest_path = _out_path(config, f"{figure}_manifest.json")
    _write_manifest(
        manifest_path,
        "figure-data",
        config,
        outputs,
        time.time() - t0,
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file or run manifest")
    parser.add_argument("--output-dir", dest="output_dir", help="directory for output files")
    parser.add_argument("--n-max", dest="n_max", type=int, help="Fock cutoff per mode")
    parser.add_argument(
        "--tol", dest="convergence_tol", type=float, help="truncation convergence tolerance"
    )


def _add_pdc_mode(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pdc", dest="p_dc", type=float, help="explicit dark-count probability")
    parser.add_argument(
        "--constraint",
        dest="constraint",
        action="store_const",
        const=True,
        help="tie dark counts to eta0 via the efficiency/dark-count fit",
    )
    parser.add_argument("--constraint-a", dest="constraint_a", type=float)
    parser.add_argument("--constraint-b", dest="constraint_b", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swapkd",
        description="Simulate and optimize entanglement-swapping QKD key rates.",
    )
    parser.add_argument("--version", action="version", version=f"swapkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="evaluate one operating point")
    _add_common(p)
    _add_pdc_mode(p)
    p.add_argument("--chi", type=float)
    p.add_argument("--eta0", type=float)
    p.add_argument("--alpha-d", dest="alpha_d", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--output-prefix", dest="output_prefix")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate a parameter grid")
    _add_common(p)
    _add_pdc_mode(p)
    p.add_argument("--chi-grid", dest="chi_grid")
    p.add_argument("--eta0-grid", dest="eta0_grid")
    p.add_argument("--alpha-d-grid", dest="alpha_d_grid")
    p.add_argument("--kappa", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-prefix", dest="output_prefix")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("optimize", help="maximize the key rate per distance")
    _add_common(p)
    _add_pdc_mode(p)
    p.add_argument("--alpha-d-grid", dest="alpha_d_grid")
    p.add_argument("--eta0", type=float, help="fix eta0 and optimize chi only")
    p.add_argument("--kappa", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-prefix", dest="output_prefix")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("compare-decoy", help="swap scheme vs decoy baseline per distance")
    _add_common(p)
    p.add_argument("--alpha-d-grid", dest="alpha_d_grid")
    p.add_argument("--eta0", type=float)
    p.add_argument("--pdc", dest="p_dc", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--mu", type=float, help="fix the decoy signal intensity")
    p.add_argument("--chi", type=float, help="fix the swap source brightness")
    p.add_argument("--kappa", type=float)
    p.add_argument("--output-prefix", dest="output_prefix")
    p.set_defaults(func=_cmd_compare_decoy)

    p = sub.add_parser("crossover", help="find the decoy/swap crossover distance")
    _add_common(p)
    p.add_argument("--eta0", type=float)
    p.add_argument("--pdc", dest="p_dc", type=float)
    p.add_argument("--alpha-min", dest="alpha_min", type=float)
    p.add_argument("--alpha-max", dest="alpha_max", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--output-prefix", dest="output_prefix")
    p.set_defaults(func=_cmd_crossover)

    p = sub.add_parser("figure-data", help="emit the published parameter grids")
    _add_common(p)
    p.add_argument("--figure", choices=["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"])
    p.add_argument("--variant", help="single variant letter; default all")
    p.add_argument("--alpha-d-grid", dest="alpha_d_grid", help="override the preset grid")
    p.add_argument("--chi-grid", dest="chi_grid", help="override the preset grid")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_cmd_figure_data)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ConstraintViolationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 2
    except Exception as exc:  # numerical failures and anything unexpected
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 3


if __name__ == "__main__":
    sys.exit(main())
