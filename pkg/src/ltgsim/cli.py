"""Batch front-end: validated configs, experiment dispatch, CSV output.

Every run writes delimited text files whose ``#``-prefixed header embeds
the fully resolved configuration (canonical JSON) and the RNG pedigree,
so re-parsing the header reproduces the data section byte for byte.

Exit codes: 0 success, 1 input error, 2 numerical error.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from importlib.metadata import version as _pkg_version
from pathlib import Path

import numpy as np

from . import analytic, measurement, optics, slm
from .rtn import RtnParams, SeedSpec, mc_exponential_moment
from .series import CoherenceSeries

COMMANDS = (
    "analytic",
    "mc-moment",
    "transition-delta",
    "transition-spectral",
    "optics-table",
    "calibrate-wcp",
    "reproduce-figure",
)

DEFAULT_CONFIG = {
    "command": None,
    "master_seed": 12345,
    "grid": {"t_min": 0.0, "t_max": 2.0 * np.pi, "points": 400},
    "rtn": {"gamma": 0.0, "p_plus": 0.5},
    "kernel": {"w_cp": 3.0, "w_p": 20.0, "n": 2},
    "geometry": {"pixels_per_half": 320, "j0": 160.0, "k0": 480.0},
    "field": {"n_rep": 3, "balanced": True, "shared": True},
    "deltas": [3, 2, 1, 0],
    "spectral": {"widths_nm": [15.0, 30.0, 60.0, 100.0], "table_path": None},
    "mc": {"order": 4, "n_real": 100000, "antithetic": True},
    "measurement": {
        "p": 0.927,
        "n0": 250.0,
        "acquisition_s": 8.0,
        "repeats": 4,
        "shot_noise": True,
        "n_r": 5,
        "h_min": -10,
        "h_max": 9,
    },
    "optics": {
        "widths_nm": [1.0, 2.5, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 60.0, 80.0, 100.0],
        "theta_0": optics.THETA0_CALIBRATED,
        "spacing_px": 0.25,
    },
    "output": {"dir": "out", "basename": None},
    "preset": None,
}

# Schema: leaf -> (type tuple, predicate or None).  Structure mirrors the
# default config; unknown keys anywhere are rejected.
_SCHEMA = {
    "command": ((str,), lambda v: v in COMMANDS),
    "master_seed": ((int,), lambda v: 0 <= v < 2**64),
    "grid": {
        "t_min": ((int, float), lambda v: v >= 0),
        "t_max": ((int, float), lambda v: v > 0),
        "points": ((int,), lambda v: v >= 1),
    },
    "rtn": {
        "gamma": ((int, float), lambda v: v >= 0),
        "p_plus": ((int, float), lambda v: 0 <= v <= 1),
    },
    "kernel": {
        "w_cp": ((int, float), lambda v: v > 0),
        "w_p": ((int, float), lambda v: v > 0),
        # evenness is diagnosed semantically, with the sign-ambiguity rule
        "n": ((int,), lambda v: v >= 2),
    },
    "geometry": {
        "pixels_per_half": ((int,), lambda v: v >= 2),
        "j0": ((int, float), None),
        "k0": ((int, float), None),
    },
    "field": {
        "n_rep": ((int,), lambda v: v >= 1),
        "balanced": ((bool,), None),
        "shared": ((bool,), None),
    },
    "deltas": ((list,), None),
    "spectral": {
        "widths_nm": ((list,), None),
        "table_path": ((str, type(None)), None),
    },
    "mc": {
        "order": ((int,), lambda v: v >= 1),
        "n_real": ((int,), lambda v: v >= 2),
        "antithetic": ((bool,), None),
    },
    "measurement": {
        "p": ((int, float), lambda v: 0 <= v <= 1),
        "n0": ((int, float), lambda v: v > 0),
        "acquisition_s": ((int, float), lambda v: v > 0),
        "repeats": ((int,), lambda v: v >= 1),
        "shot_noise": ((bool,), None),
        "n_r": ((int,), lambda v: v >= 1),
        "h_min": ((int,), None),
        "h_max": ((int,), None),
    },
    "optics": {
        "widths_nm": ((list,), None),
        "theta_0": ((int, float), lambda v: v > 0),
        "spacing_px": ((int, float), lambda v: 0 < v <= 0.25),
    },
    "output": {
        "dir": ((str,), None),
        "basename": ((str, type(None)), None),
    },
    "preset": ((str, type(None)), None),
}

PRESETS = {
    # Shift strategy at gamma = 0 with the measured 15-nm kernel.
    "fig3-left": {"command": "transition-delta", "rtn": {"gamma": 0.0}, "deltas": [3]},
    "fig3-right": {"command": "transition-delta", "rtn": {"gamma": 0.0}, "deltas": [0]},
    # Slow noise, both transition strategies.
    "fig4-left": {
        "command": "transition-delta",
        "rtn": {"gamma": 0.12},
        "deltas": [3, 2, 1, 0],
    },
    "fig4-right": {
        "command": "transition-spectral",
        "rtn": {"gamma": 0.12},
        "spectral": {"widths_nm": [15.0, 30.0, 60.0, 100.0], "table_path": None},
    },
    # Correlated-pixel calibration at the measured conditions.
    "figS-calibration": {
        "command": "calibrate-wcp",
        "kernel": {"w_cp": 3.1, "w_p": 20.0, "n": 2},
        "spectral": {"widths_nm": [15.0]},
        "measurement": {"shot_noise": True},
    },
}


class ConfigError(ValueError):
    """Configuration failed schema or consistency checks."""


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be a table")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def _check_schema(config: dict, schema: dict = _SCHEMA, path: str = "") -> list[str]:
    problems = []
    for key, val in config.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            problems.append(f"unknown config key: {where}")
            continue
        spec = schema[key]
        if isinstance(spec, dict):
            if not isinstance(val, dict):
                problems.append(f"{where}: expected a table")
            else:
                problems.extend(_check_schema(val, spec, where))
            continue
        types, pred = spec
        if isinstance(val, bool) and bool not in types:
            problems.append(f"{where}: unexpected boolean")
        elif not isinstance(val, types):
            problems.append(f"{where}: bad type {type(val).__name__}")
        elif pred is not None and not pred(val):
            problems.append(f"{where}: value {val!r} out of range")
    return problems


def resolve_config(user_config: dict) -> dict:
    """Merge over defaults, expand presets, reject unknown keys."""
    config = _merge(DEFAULT_CONFIG, user_config)
    if config["command"] == "reproduce-figure" or (
        config["command"] is None and config.get("preset")
    ):
        name = config.get("preset")
        if name not in PRESETS:
            raise ConfigError(
                f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
            )
        config = _merge(config, PRESETS[name])
    if config["command"] is None:
        raise ConfigError("config must name a command (or a preset)")
    problems = _check_schema(config)
    if problems:
        raise ConfigError("; ".join(problems))
    return config


def validate_config(config: dict) -> list[str]:
    """All range and consistency diagnostics, without running anything."""
    try:
        config = resolve_config(config)
    except ConfigError as exc:
        return [str(exc)]
    diags = []
    geo = config["geometry"]
    npix = geo["pixels_per_half"]
    try:
        slm.MaskGeometry(npix, 100e-6, geo["j0"], geo["k0"])
    except ValueError as exc:
        diags.append(f"geometry: {exc}")
    try:
        slm.KernelParams(config["kernel"]["w_cp"], config["kernel"]["w_p"], config["kernel"]["n"])
    except ValueError as exc:
        diags.append(f"kernel: {exc}")
    if config["grid"]["t_max"] <= config["grid"]["t_min"]:
        diags.append("grid: t_max must exceed t_min")
    for d in config["deltas"]:
        if not isinstance(d, int) or abs(d) >= npix:
            diags.append(f"deltas: shift {d} leaves the {npix}-pixel mask")
    if config["mc"]["antithetic"] and config["mc"]["n_real"] % 2:
        diags.append("mc: antithetic pairing requires an even n_real")
    lo, hi = _spectral_bounds(config)
    for width in config["spectral"]["widths_nm"]:
        if not isinstance(width, (int, float)) or not lo <= width <= hi:
            diags.append(
                f"spectral: width {width} nm outside optics calibration "
                f"bounds [{lo}, {hi}] nm"
            )
    for width in config["optics"]["widths_nm"]:
        if not isinstance(width, (int, float)) or not 0 <= width <= optics.MAX_SPECTRAL_WIDTH_NM:
            diags.append(
                f"optics: width {width} nm outside model range "
                f"[0, {optics.MAX_SPECTRAL_WIDTH_NM}] nm"
            )
    if config["measurement"]["h_max"] < config["measurement"]["h_min"]:
        diags.append("measurement: empty h grid")
    return diags


def _spectral_bounds(config) -> tuple[float, float]:
    path = config["spectral"]["table_path"]
    if path:
        try:
            table = optics.WcpTable.from_csv(Path(path).read_text())
            return float(table.widths_nm.min()), float(table.widths_nm.max())
        except OSError:
            return (0.0, optics.MAX_SPECTRAL_WIDTH_NM)
    lo = min(config["optics"]["widths_nm"], default=0.0)
    hi = max(config["optics"]["widths_nm"], default=optics.MAX_SPECTRAL_WIDTH_NM)
    return (float(lo), float(hi))


# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------


def _meta_lines(config: dict, extra: dict) -> list[str]:
    try:
        pkg = _pkg_version("ltgsim")
    except Exception:
        pkg = "0.1.0"
    lines = [
        f"# ltgsim = {pkg}",
        f"# rng = PCG64 (numpy {np.__version__}); streams via "
        "SeedSequence(master_seed, spawn_key)",
        f"# config = {json.dumps(config, sort_keys=True, separators=(',', ':'))}",
    ]
    for key in sorted(extra):
        lines.append(f"# {key} = {json.dumps(extra[key], sort_keys=True, separators=(',', ':'))}")
    return lines


def _fmt(x: float) -> str:
    return repr(float(x))


def series_csv(series: CoherenceSeries, config: dict, extra: dict) -> str:
    if not (np.all(np.isfinite(series.times)) and np.all(np.isfinite(series.values))):
        raise ValueError("refusing to write non-finite series data")
    cols = ["t", "re_gamma", "im_gamma", "abs_gamma", "entanglement"]
    if series.stderr is not None:
        cols.append("stderr")
    lines = _meta_lines(config, {**extra, "series": series.params, "provenance": series.provenance})
    lines.append("# columns = " + ",".join(cols))
    lines.append(",".join(cols))
    mag = series.magnitude
    for i, t in enumerate(series.times):
        row = [_fmt(t), _fmt(series.values[i].real), _fmt(series.values[i].imag),
               _fmt(mag[i]), _fmt(mag[i])]
        if series.stderr is not None:
            row.append(_fmt(series.stderr[i]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def data_section(text: str) -> str:
    """The non-comment part of an output file (header row + rows)."""
    return "\n".join(l for l in text.splitlines() if not l.startswith("#")) + "\n"


def embedded_config(text: str) -> dict:
    for line in text.splitlines():
        if line.startswith("# config = "):
            return json.loads(line[len("# config = "):])
    raise ValueError("no embedded config found")


# ---------------------------------------------------------------------------
# Command implementations: each returns {relative filename: file text}
# ---------------------------------------------------------------------------


def _grid(config) -> np.ndarray:
    g = config["grid"]
    return np.linspace(g["t_min"], g["t_max"], g["points"])


def _geometry(config) -> slm.MaskGeometry:
    g = config["geometry"]
    return slm.MaskGeometry(g["pixels_per_half"], 100e-6, g["j0"], g["k0"])


def _kernel_params(config) -> slm.KernelParams:
    k = config["kernel"]
    return slm.KernelParams(k["w_cp"], k["w_p"], k["n"], _geometry(config))


def _run_analytic(config):
    times = _grid(config)
    gamma = config["rtn"]["gamma"]
    out = {}
    for tag, series in (
        ("le", analytic.local_coherence(gamma, times)),
        ("ge", analytic.global_coherence(gamma, times)),
    ):
        out[f"analytic_{tag}.csv"] = series_csv(series, config, {})
    return out


def _run_mc_moment(config):
    times = _grid(config)
    params = RtnParams(config["rtn"]["gamma"], float(times.max()), config["rtn"]["p_plus"])
    series = mc_exponential_moment(
        params,
        config["mc"]["order"],
        times,
        config["mc"]["n_real"],
        SeedSpec(config["master_seed"], 0),
        antithetic=config["mc"]["antithetic"],
    )
    return {"mc_moment.csv": series_csv(series, config, {})}


def _run_transition_delta(config):
    times = _grid(config)
    sweep = slm.transition_sweep_delta(
        config["rtn"]["gamma"],
        [int(d) for d in config["deltas"]],
        _kernel_params(config),
        times,
        n_rep=config["field"]["n_rep"],
        seed=SeedSpec(config["master_seed"], 0),
        balanced=config["field"]["balanced"],
    )
    out = {}
    for series in sweep:
        d = series.params["delta"]
        out[f"transition_delta_{d}.csv"] = series_csv(series, config, {})
    return out


def _optics_model(config):
    path = config["spectral"]["table_path"]
    if path:
        return optics.WcpTable.from_csv(Path(path).read_text())
    setup = optics.PdcSetup(theta_0=config["optics"]["theta_0"])
    needed = sorted(set(float(w) for w in config["spectral"]["widths_nm"]))
    return optics.wcp_curve(setup, needed)


def _run_transition_spectral(config):
    times = _grid(config)
    model = _optics_model(config)
    sweep = slm.transition_sweep_spectral(
        config["rtn"]["gamma"],
        [float(w) for w in config["spectral"]["widths_nm"]],
        model,
        times,
        n_rep=config["field"]["n_rep"],
        geometry=_geometry(config),
        seed=SeedSpec(config["master_seed"], 0),
        balanced=config["field"]["balanced"],
    )
    out = {}
    for series in sweep:
        width = series.params["spectral_width_nm"]
        tag = f"{width:g}".replace(".", "p")
        out[f"transition_spectral_{tag}nm.csv"] = series_csv(series, config, {})
    return out


def _run_optics_table(config):
    setup = optics.PdcSetup(theta_0=config["optics"]["theta_0"])
    table = optics.wcp_curve(setup, [float(w) for w in config["optics"]["widths_nm"]])
    header = "\n".join(_meta_lines(config, {})) + "\n"
    return {"wcp_table.csv": header + table.to_csv()}


def _run_calibrate_wcp(config):
    m = config["measurement"]
    result = measurement.calibrate_wcp(
        _kernel_params(config),
        p=m["p"],
        n_r=m["n_r"],
        h_values=np.arange(m["h_min"], m["h_max"] + 1),
        n0=m["n0"],
        acquisition_s=m["acquisition_s"],
        repeats=m["repeats"],
        shot_noise=m["shot_noise"],
        seed=SeedSpec(config["master_seed"], 0),
    )
    widths = config["spectral"]["widths_nm"]
    summary = {
        "gamma": config["rtn"]["gamma"],
        "delta": 0,
        "w_cp": config["kernel"]["w_cp"],
        "n": config["kernel"]["n"],
        "w_p": config["kernel"]["w_p"],
        "p": m["p"],
        "seed": config["master_seed"],
        "spectral_width_nm": widths[0] if len(widths) == 1 else None,
        "n_r": m["n_r"],
        "acquisition_s": m["acquisition_s"],
        "repeats": m["repeats"],
        "vis_of_v": result.vis_of_v,
        "vis_uncertainty": result.vis_uncertainty,
        "w_cp_estimate": result.w_cp_estimate,
        "w_cp_uncertainty": result.w_cp_uncertainty,
    }
    lines = _meta_lines(config, {"calibration": summary})
    lines.append("# columns = h,v")
    lines.append("h,v")
    for h, v in zip(result.h_values, result.v_of_h):
        lines.append(f"{int(h)},{_fmt(v)}")
    vh = "\n".join(lines) + "\n"

    lines = _meta_lines(config, {"calibration": summary})
    lines.append("# columns = w_cp,vis")
    lines.append("w_cp,vis")
    for w, v in zip(result.curve_w, result.curve_vis):
        lines.append(f"{_fmt(w)},{_fmt(v)}")
    curve = "\n".join(lines) + "\n"
    return {"calibration_vh.csv": vh, "calibration_curve.csv": curve}


_RUNNERS = {
    "analytic": _run_analytic,
    "mc-moment": _run_mc_moment,
    "transition-delta": _run_transition_delta,
    "transition-spectral": _run_transition_spectral,
    "optics-table": _run_optics_table,
    "calibrate-wcp": _run_calibrate_wcp,
}


def run_config(user_config: dict) -> dict[str, str]:
    """Resolve, validate and execute a config; returns {filename: text}."""
    config = resolve_config(user_config)
    diags = validate_config(config)
    if diags:
        raise ConfigError("; ".join(diags))
    command = config["command"]
    if command == "reproduce-figure":
        raise ConfigError("reproduce-figure requires a preset name")
    return _RUNNERS[command](config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ltgsim",
        description="Dephasing of two qubits under telegraph noise: "
        "analytic, Monte Carlo, pixel-kernel and calibration experiments.",
    )
    parser.add_argument("--config", type=str, help="JSON config file")
    parser.add_argument("--preset", type=str, help="named preset (see README)")
    parser.add_argument("--seed", type=int, help="override master seed")
    parser.add_argument("--out", type=str, help="output directory")
    parser.add_argument(
        "--validate", action="store_true",
        help="report config diagnostics without running",
    )
    args = parser.parse_args(argv)

    user: dict = {}
    if args.config:
        try:
            user = json.loads(Path(args.config).read_text())
        except OSError as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return 1
        except json.JSONDecodeError as exc:
            print(f"config is not valid JSON: {exc}", file=sys.stderr)
            return 1
    if args.preset:
        user["preset"] = args.preset
        user.setdefault("command", "reproduce-figure")
    if args.seed is not None:
        user["master_seed"] = args.seed
    if args.out:
        user.setdefault("output", {})["dir"] = args.out
    if not user:
        parser.print_usage(sys.stderr)
        return 1

    if args.validate:
        diags = validate_config(user)
        for d in diags:
            print(d)
        return 1 if diags else 0

    try:
        files = run_config(user)
        out_dir = Path(resolve_config(user)["output"]["dir"])
    except ConfigError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except optics.NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2

    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        (out_dir / name).write_text(text)
        print(out_dir / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
