"""Command-line entry point: ``momentum-sa <command> [--config FILE] [flags]``.

Every command reads an optional INI file (one ``[experiment]`` section) and
lets flags override individual keys. The effective configuration is echoed
to ``config.ini`` in the output directory together with a seed manifest, so
a run can be repeated bit for bit with ``--config <run>/config.ini``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import harness, kernels, linear_model, linalg, mdp, rl_algos, variance
from .sa_core import geometric_grid

SECTION = "experiment"


class ConfigError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


# value parsers -----------------------------------------------------------------

def parse_count(key: str, text: str) -> int:
    """Non-negative integer; scientific notation such as ``1e5`` is accepted."""
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as an integer") from None
    if not np.isfinite(value) or value != int(value) or value < 0:
        raise ConfigError(f"{key}: {text!r} is not a non-negative integer")
    return int(value)


def parse_float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None


def parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: cannot parse {text!r} as a boolean")


def parse_grid(key: str, text: str) -> tuple:
    """``start:stop:step`` (stop included), a comma list, or a single number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: grid {text!r} must be start:stop:step")
        start, stop, step = (parse_float(key, p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"{key}: grid {text!r} must have step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 12) for k in range(count))
    values = tuple(parse_float(key, p) for p in text.split(",") if p.strip())
    if not values:
        raise ConfigError(f"{key}: empty list")
    return values


def parse_list(key: str, text: str) -> tuple:
    items = tuple(p.strip() for p in text.split(",") if p.strip())
    if not items:
        raise ConfigError(f"{key}: empty list")
    return items


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


# schemas -----------------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    parse: object
    default: str | None = None       # None means required
    help: str = ""


RUN_KEYS = {
    "steps": Key(parse_count, "100000", "number of iterations n"),
    "trials": Key(parse_count, "100", "independent trials T"),
    "seed": Key(parse_count, "0", "base seed"),
    "out": Key(lambda k, v: v, "", "output directory (default runs/<command>-seed<seed>)"),
    "threads": Key(parse_count, "0", "worker threads (0: environment or CPU count)"),
    "per_decade": Key(parse_count, "4", "snapshots per decade of n"),
    "max_divergence": Key(parse_float, "0.1", "largest tolerated fraction of divergent trials"),
    "gnuplot": Key(parse_bool, "false", "also write a gnuplot script"),
}

SCHEMAS = {
    "coupling": {
        "preset": Key(lambda k, v: v, None, "linear model preset"),
        "zeta": Key(parse_grid, "0.5:1.9:0.2", "momentum gains, start:stop:step or list"),
        "polsa": Key(lambda k, v: v, "fixed", "PolSA momentum matrix: fixed (A) or estimated"),
        **RUN_KEYS,
    },
    "covariance": {
        "preset": Key(lambda k, v: v, None, "linear model preset"),
        "algorithms": Key(parse_list, "SNR_ideal,PolSA,NeSA", "comma list of algorithms"),
        "zeta": Key(parse_float, "1.0", "momentum gain"),
        **RUN_KEYS,
    },
    "qlearn": {
        "preset": Key(lambda k, v: v, None, "MDP preset name or .mdp file"),
        "algorithms": Key(parse_list, "Watkins,SNR,PolSA,PolSA_D,NeSA", "comma list"),
        "exploration": Key(lambda k, v: v, "async", "async or clock"),
        "zeta": Key(parse_float, "1.0", "momentum gain"),
        **RUN_KEYS,
    },
    "td": {
        "preset": Key(lambda k, v: v, None, "chain preset (cycle)"),
        "states": Key(parse_count, "4", "number of chain states"),
        "beta": Key(parse_float, "0.5", "discount factor"),
        "algorithms": Key(parse_list, "TD0,LSTD0,PolSA_TD0,NeSA_TD0", "comma list"),
        "zeta": Key(parse_float, "1.0", "momentum gain"),
        **RUN_KEYS,
    },
    "variance": {
        "preset": Key(lambda k, v: v, None, "linear model preset"),
        "zeta": Key(parse_grid, "1.0", "momentum gains"),
        "out": Key(lambda k, v: v, "", "optional output directory for prediction.csv"),
    },
    "gen-mdp": {
        "nodes": Key(parse_count, None, "number of graph nodes"),
        "p": Key(parse_float, None, "edge probability"),
        "seed": Key(parse_count, "0", "graph seed"),
        "success_prob": Key(parse_float, "0.8", "probability a move succeeds"),
        "beta": Key(parse_float, "0.8", "discount factor"),
        "out": Key(lambda k, v: v, "", "output .mdp file (default graph-n<nodes>-s<seed>.mdp)"),
    },
}

LINEAR_NAMES = tuple(kernels.LINEAR_CODES)
Q_NAMES = tuple(kernels.Q_CODES)
TD_NAMES = tuple(k.value for k in rl_algos.TdAlgorithm)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def to_ini(self) -> str:
        lines = [f"[{SECTION}]", f"command = {self.command}"]
        lines += [f"{k} = {_format(v)}" for k, v in self.values.items()]
        return "\n".join(lines) + "\n"


def read_config_file(path) -> dict[str, str]:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    extra = [s for s in cp.sections() if s != SECTION]
    if extra:
        raise ConfigError(f"unknown config section(s) {extra}; use [{SECTION}]")
    return dict(cp[SECTION]) if cp.has_section(SECTION) else {}


def parse_config(command: str, file_values: dict | None = None,
                 flag_values: dict | None = None) -> ExperimentConfig:
    """Merge file and flag values (flags win), validate, and type every key."""
    schema = SCHEMAS[command]
    raw = dict(file_values or {})
    file_command = raw.pop("command", None)
    if file_command is not None and file_command != command:
        raise ConfigError(f"command: config is for {file_command!r}, not {command!r}")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; allowed: {sorted(schema)}")
    raw.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    missing = [k for k, spec in schema.items() if spec.default is None and k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    values = {}
    for key, spec in schema.items():
        text = raw.get(key, spec.default)
        values[key] = spec.parse(key, str(text))
    config = ExperimentConfig(command, values)
    _validate(config)
    return config


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    cmd = cfg.command
    if cmd in ("coupling", "covariance", "variance") and v["preset"] not in linear_model.PRESETS:
        raise ConfigError(f"preset: unknown linear preset {v['preset']!r}; "
                          f"choose from {sorted(linear_model.PRESETS)}")
    if cmd == "qlearn":
        if v["preset"] not in mdp.MDP_PRESETS and not Path(v["preset"]).is_file():
            raise ConfigError(f"preset: {v['preset']!r} is neither an MDP preset "
                              f"{sorted(mdp.MDP_PRESETS)} nor a file")
        if v["exploration"] not in ("async", "clock"):
            raise ConfigError(f"exploration: expected async or clock, got {v['exploration']!r}")
    if cmd == "td" and v["preset"] != "cycle":
        raise ConfigError(f"preset: unknown chain preset {v['preset']!r}; choose from ['cycle']")
    if cmd == "coupling" and v["polsa"] not in ("fixed", "estimated"):
        raise ConfigError(f"polsa: expected fixed or estimated, got {v['polsa']!r}")
    names = {"covariance": LINEAR_NAMES, "qlearn": Q_NAMES, "td": TD_NAMES}.get(cmd)
    if names:
        for name in v["algorithms"]:
            if name not in names:
                raise ConfigError(f"algorithms: unknown algorithm {name!r}; choose from {list(names)}")
    if "trials" in v and v["trials"] < 1:
        raise ConfigError("trials: must be at least 1")
    if "max_divergence" in v and not 0.0 <= v["max_divergence"] <= 1.0:
        raise ConfigError("max_divergence: must lie in [0, 1]")
    for key in ("zeta",):
        zs = v.get(key)
        if zs is not None and any(z <= 0 for z in np.atleast_1d(zs)):
            raise ConfigError(f"{key}: momentum gains must be positive")
    if cmd == "gen-mdp":
        if v["nodes"] < 2:
            raise ConfigError("nodes: need at least 2")
        if not 0.0 <= v["p"] <= 1.0:
            raise ConfigError("p: must lie in [0, 1]")
        if not 0.0 < v["success_prob"] <= 1.0:
            raise ConfigError("success_prob: must lie in (0, 1]")
    if cmd in ("td", "gen-mdp") and not 0.0 < v["beta"] < 1.0:
        raise ConfigError("beta: must lie in (0, 1)")


# output helpers ----------------------------------------------------------------

def _out_dir(cfg: ExperimentConfig) -> Path:
    out = cfg["out"] or f"runs/{cfg.command}-seed{cfg['seed']}"
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"out: directory {out!r} is not writable ({exc.strerror})") from None
    return path


def _write_provenance(out: Path, cfg: ExperimentConfig, result: harness.TrialResult | None) -> None:
    (out / "config.ini").write_text(cfg.to_ini())
    manifest = {
        "command": cfg.command,
        "base_seed": cfg.values.get("seed"),
        "seed_derivation": "numpy SeedSequence(base_seed, spawn_key=(trial,))",
        "backend": kernels.BACKEND,
        "numpy": np.__version__,
    }
    if result is not None:
        manifest["trials"] = [
            {"trial": t, "spawn_key": [t], "stream_checksums": list(result.checksums[t])}
            for t in range(result.trials)]
        manifest["diverged"] = {lab: result.divergence_count(lab) for lab in result.labels}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _snapshots(cfg: ExperimentConfig) -> tuple:
    n = cfg["steps"]
    pts = [0] + geometric_grid(n, min(100, max(n, 1)), cfg["per_decade"]) if n else [0]
    return tuple(sorted(set(pts)))


def _plan(cfg: ExperimentConfig, problem, algorithms, **extra) -> harness.TrialPlan:
    return harness.TrialPlan(problem, tuple(algorithms), cfg["steps"], _snapshots(cfg),
                             trials=cfg["trials"], base_seed=cfg["seed"],
                             workers=cfg["threads"] or None, **extra)


def _check_divergence(cfg: ExperimentConfig, result: harness.TrialResult) -> None:
    worst = {lab: result.divergence_count(lab) / result.trials for lab in result.labels}
    bad = {lab: f for lab, f in worst.items() if f > cfg["max_divergence"]}
    if bad:
        detail = ", ".join(f"{lab} {f:.0%}" for lab, f in bad.items())
        raise NumericFailure(f"divergent trials above max_divergence={cfg['max_divergence']}: {detail}")


def _table(header, rows) -> str:
    cells = [list(map(str, header))] + [[_cell(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _gnuplot(out: Path, csv_name: str, xcol: int, ycol: int, title: str, group_col: int | None = None):
    lines = [
        "set datafile separator ','",
        "set logscale x",
        f"set title '{title}'",
        "set key autotitle columnhead",
    ]
    if group_col is None:
        lines.append(f"plot '{csv_name}' using {xcol}:{ycol} with linespoints")
    else:
        lines.append(f"groups = system(\"tail -n +2 {csv_name} | cut -d, -f{group_col} | sort -u\")")
        lines.append(f"plot for [g in groups] '{csv_name}' using {xcol}:"
                     f"(stringcolumn({group_col}) eq g ? ${ycol} : NaN) with linespoints title g")
    (out / "plot.gp").write_text("\n".join(lines) + "\n")


# commands ----------------------------------------------------------------------

def cmd_coupling(cfg: ExperimentConfig) -> int:
    spec = linear_model.preset(cfg["preset"])
    name = "PolSA_fixed" if cfg["polsa"] == "fixed" else "PolSA"
    zetas = cfg["zeta"]
    algos = [harness.AlgoConfig("SNR_ideal")] + [
        harness.AlgoConfig(name, z, f"{name}@{z!r}") for z in zetas]
    out = _out_dir(cfg)
    result = harness.run_trials(_plan(cfg, spec, algos))
    curve = harness.coupling_curve(result, "SNR_ideal", [a.key for a in algos[1:]], zetas)
    harness.write_coupling_csv(out / "coupling.csv", curve)
    _write_provenance(out, cfg, result)
    if cfg["gnuplot"]:
        _gnuplot(out, "coupling.csv", 2, 4, "median n^2 |theta - theta*|^2", group_col=1)
    k3 = int(np.argmin(np.abs(curve.snapshots - 1000)))
    rows = [(z, float(curve.median[i, k3]), float(curve.median[i, -1]), int(curve.diverged[i]))
            for i, z in enumerate(zetas)]
    print(_table(("zeta", f"median@n={curve.snapshots[k3]}", f"median@n={curve.snapshots[-1]}",
                  "diverged"), rows))
    print(f"wrote {out / 'coupling.csv'}")
    _check_divergence(cfg, result)
    return 0


def _linear_targets(spec, name: str, zeta: float) -> dict:
    sigma_star = linear_model.facts(spec).sigma_star
    if name in ("SNR_ideal", "SNR"):
        return {"11": sigma_star}
    if name in ("PolSA", "PolSA_fixed"):
        pred = variance.predict_polsa(spec.a_mean, spec.noise_cov, zeta)
        return {"11": pred.sigma11, "22": pred.sigma22}
    if name == "NeSA" and zeta == 1.0:
        pred = variance.predict_nesa(linear_model.l_operator(spec), spec.a_mean, spec.noise_cov)
        return {"11": pred.sigma11, "22": pred.sigma22}
    return {}


def cmd_covariance(cfg: ExperimentConfig) -> int:
    spec = linear_model.preset(cfg["preset"])
    algos = [harness.AlgoConfig(a, cfg["zeta"]) for a in cfg["algorithms"]]
    out = _out_dir(cfg)
    result = harness.run_trials(_plan(cfg, spec, algos))
    reports, rows = [], []
    for algo in algos:
        try:
            targets = _linear_targets(spec, algo.name, cfg["zeta"])
        except linalg.StabilityError as exc:
            print(f"note: no prediction for {algo.name}: {exc}")
            targets = {}
        rep = harness.estimate_covariance(result, algo.key, targets=targets)
        reports.append(rep)
        errs = {b: rep.relative_error(b) for b in ("11", "22") if b in targets}
        rows.append((algo.key, rep.trials, rep.diverged, errs.get("11", float("nan")),
                     errs.get("22", float("nan"))))
    harness.write_covariance_csv(out / "covariance.csv", reports)
    _write_provenance(out, cfg, result)
    print(_table(("algorithm", "trials", "diverged", "rel.err 11", "rel.err 22"), rows))
    print(f"wrote {out / 'covariance.csv'}")
    _check_divergence(cfg, result)
    return 0


def cmd_qlearn(cfg: ExperimentConfig) -> int:
    try:
        model = mdp.preset(cfg["preset"])
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"preset: cannot load MDP {cfg['preset']!r}: {exc}") from None
    algos = [harness.AlgoConfig(a, cfg["zeta"]) for a in cfg["algorithms"]]
    out = _out_dir(cfg)
    result = harness.run_trials(_plan(cfg, model, algos, exploration=cfg["exploration"]))
    series = harness.bellman_trajectory(result, model)
    harness.write_bellman_csv(out / "bellman.csv", result.snapshots, series)
    n = int(result.snapshots[-1])
    if n > 0:
        for algo in algos:
            values = {i: harness.scaled_errors(result, algo.key, i, n) for i in range(model.d)}
            harness.write_hist_csv(out / f"hist_{algo.key}.csv", values)
    _write_provenance(out, cfg, result)
    if cfg["gnuplot"]:
        _gnuplot(out, "bellman.csv", 2, 3, "Bellman error", group_col=1)
    rows = [(lab, float(v[0]), float(v[-1]), result.divergence_count(lab))
            for lab, v in series.items()]
    print(f"MDP {cfg['preset']}: d={model.d}, beta={model.beta}, exploration={cfg['exploration']}")
    print(_table(("algorithm", f"error@n={result.snapshots[0]}", f"error@n={n}", "diverged"), rows))
    print(f"wrote {out / 'bellman.csv'}")
    _check_divergence(cfg, result)
    return 0


def cmd_td(cfg: ExperimentConfig) -> int:
    model = rl_algos.cycle_chain(cfg["states"], cfg["beta"])
    algos = [harness.AlgoConfig(a, cfg["zeta"]) for a in cfg["algorithms"]]
    out = _out_dir(cfg)
    result = harness.run_trials(_plan(cfg, model, algos))
    series = {}
    for a, lab in enumerate(result.labels):
        ok = result.ok(lab)
        err = np.linalg.norm(result.theta[ok, a] - result.theta_star, axis=-1)
        series[lab] = err.mean(axis=0) if err.size else np.full(result.snapshots.size, np.nan)
    harness.write_bellman_csv(out / "td.csv", result.snapshots, series)
    _write_provenance(out, cfg, result)
    if cfg["gnuplot"]:
        _gnuplot(out, "td.csv", 2, 3, "|theta - theta*|", group_col=1)
    rows = [(lab, float(v[-1]), result.divergence_count(lab)) for lab, v in series.items()]
    print(f"theta* = {np.array2string(result.theta_star, precision=6)}")
    print(_table(("algorithm", f"|error|@n={result.snapshots[-1]}", "diverged"), rows))
    print(f"wrote {out / 'td.csv'}")
    _check_divergence(cfg, result)
    return 0


def cmd_variance(cfg: ExperimentConfig) -> int:
    spec = linear_model.preset(cfg["preset"])
    sigma_star = linear_model.facts(spec).sigma_star
    print(f"preset {cfg['preset']}: d={spec.dim}")
    print("Sigma* =")
    print(np.array2string(sigma_star, precision=6))
    rows = [("Sigma*", "11", i, j, float(sigma_star[i, j]))
            for i in range(spec.dim) for j in range(spec.dim)]
    reports = [variance.check_stability(spec.a_mean, z, linear_model.l_operator(spec, z))
               for z in cfg["zeta"]]
    print(_table(("zeta", "max Re(lambda)", "max |1+zeta*lambda|", "rho(L)", "stable"),
                 [(r.zeta, float(r.eigenvalues.real.max()),
                   float(np.abs(1 + r.zeta * r.eigenvalues).max()), r.l_spectral_radius,
                   "yes" if r.overall else "no") for r in reports]))
    for zeta, report in zip(cfg["zeta"], reports):
        if not report.overall:
            raise NumericFailure(f"zeta={zeta!r}: {report.failure_reason()}")
        pred = variance.predict_polsa(spec.a_mean, spec.noise_cov, zeta)
        print(f"PolSA zeta={zeta!r}: Sigma22 =")
        print(np.array2string(pred.sigma22, precision=6))
        rows += [(f"PolSA@{zeta!r}", "22", i, j, float(pred.sigma22[i, j]))
                 for i in range(spec.dim) for j in range(spec.dim)]
    pred = variance.predict_nesa(linear_model.l_operator(spec), spec.a_mean, spec.noise_cov)
    print("NeSA: Sigma22 =")
    print(np.array2string(pred.sigma22, precision=6))
    print("NeSA: Sigma11 =" + ("" if pred.sigma11_psd else "  (not positive semidefinite)"))
    print(np.array2string(pred.sigma11, precision=6))
    if not np.allclose(pred.sigma11, pred.sigma11_verbatim):
        print("NeSA: Sigma11 with A^{-1} on both sides (non-symmetric A) =")
        print(np.array2string(pred.sigma11_verbatim, precision=6))
    for block, mat in (("22", pred.sigma22), ("11", pred.sigma11)):
        rows += [("NeSA", block, i, j, float(mat[i, j]))
                 for i in range(spec.dim) for j in range(spec.dim)]
    if cfg["out"]:
        out = Path(cfg["out"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"out: cannot create {cfg['out']!r} ({exc.strerror})") from None
        with (out / "prediction.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("algorithm", "block", "i", "j", "value"))
            w.writerows((a, b, i, j, repr(v)) for a, b, i, j, v in rows)
        (out / "config.ini").write_text(cfg.to_ini())
        print(f"wrote {out / 'prediction.csv'}")
    return 0


def cmd_gen_mdp(cfg: ExperimentConfig) -> int:
    model = mdp.random_graph_mdp(cfg["nodes"], cfg["p"], cfg["success_prob"], cfg["seed"],
                                 cfg["beta"])
    path = Path(cfg["out"] or f"graph-n{cfg['nodes']}-s{cfg['seed']}.mdp")
    try:
        mdp.save(model, path)
    except OSError as exc:
        raise ConfigError(f"out: cannot write {str(path)!r} ({exc.strerror})") from None
    print(f"wrote {path}: {model.n_states} states, {len(model.edges)} edges, d={model.d}")
    return 0


COMMANDS = {
    "coupling": cmd_coupling,
    "covariance": cmd_covariance,
    "qlearn": cmd_qlearn,
    "td": cmd_td,
    "variance": cmd_variance,
    "gen-mdp": cmd_gen_mdp,
}

HELP = {
    "coupling": "paired PolSA vs idealized SNR on a linear model over a zeta grid",
    "covariance": "Monte-Carlo scaled covariances against their predicted limits",
    "qlearn": "tabular Q-learning Bellman error and histograms on an MDP",
    "td": "TD(0)-family algorithms on a cycle chain",
    "variance": "analytic covariance predictions",
    "gen-mdp": "generate and save a random-graph MDP",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentum-sa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="INI file with an [experiment] section")
        for key, spec in schema.items():
            flag = "--" + key.replace("_", "-")
            default = "required" if spec.default is None else f"default {spec.default or 'auto'}"
            p.add_argument(flag, dest=key, default=None, help=f"{spec.help} ({default})")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = parse_config(command, file_values, flags)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericFailure, linalg.LinalgError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
