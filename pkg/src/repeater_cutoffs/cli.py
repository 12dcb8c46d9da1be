"""Command-line interface: sweeps that write CSV or JSON tables.

Every command reads its options from ``--config FILE`` (``key = value``
lines) and from flags; flags win. Without ``--output`` the table goes to
``$REPCUT_OUTPUT_DIR/<command>.<format>`` when that variable is set and to
stdout otherwise.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(singular solve or failed search certificate), 4 Monte Carlo episode cap.
Errors are reported on stderr as a JSON object.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .exact import EXACT_NODES, evaluate_exact
from .model import ChainParams, Deterministic, DeterministicE2E, Probabilistic
from .montecarlo import DEFAULT_MAX_STEPS, EpisodeCapExceeded, MonteCarloEvaluator, estimate_performance
from .optimize import (
    ExactEvaluator,
    equal_rate_pc,
    max_rate_above_fidelity,
    maximize_over_pc,
    maximize_over_tc,
)

__all__ = ["RunConfig", "ConfigError", "COMMANDS", "main", "run", "parse_config_text"]

OUTPUT_DIR_ENV = "REPCUT_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_EPISODE_CAP = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid command, option name or option value."""


# ---------------------------------------------------------------- value types

def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_cutoff_time(text: str):
    value = float(text)
    if value == math.inf:
        return math.inf
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _expand_range(text: str, scalar: Callable) -> list:
    """``a,b,c`` or the inclusive range ``start:stop:step``; empty text is an empty list."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ValueError(f"range step must be positive, got {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + k * step, 12) for k in range(max(count, 0))]
        return [scalar(str(int(x)) if x == int(x) else repr(x)) for x in values]
    return [scalar(p) for p in text.split(",")]


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Option:
    name: str
    kind: str  # int | float | str | bool | tc, or int, float or tc with "_list"
    default: Any
    help: str
    choices: Optional[Tuple[str, ...]] = None

    def parse(self, text: str):
        if text is None or (isinstance(text, str) and text.strip().lower() == "none" and self.default is None):
            return None
        if not isinstance(text, str):
            return text
        try:
            if self.kind.endswith("_list"):
                return tuple(_expand_range(text, _SCALARS[self.kind[:-5]]))
            value = _SCALARS[self.kind](text.strip())
        except ValueError as exc:
            raise ConfigError(f"option {self.name}: {exc}") from None
        if self.choices and value not in self.choices:
            raise ConfigError(f"option {self.name} must be one of {', '.join(self.choices)}, got {value!r}")
        return value

    def format(self, value) -> str:
        if value is None:
            return "none"
        if self.kind.endswith("_list"):
            return ",".join(_format_scalar(v) for v in value)
        return _format_scalar(value)


_SCALARS: Dict[str, Callable] = {
    "int": lambda s: int(s),
    "float": lambda s: float(s),
    "str": lambda s: s,
    "bool": _parse_bool,
    "tc": _parse_cutoff_time,
}


def _chain_options(listed: bool) -> List[Option]:
    lk = "_list" if listed else ""
    return [
        Option("n_node", "int" + lk, (3,) if listed else 3, "number of nodes including the end nodes"),
        Option("p_g", "float" + lk, (0.1,) if listed else 0.1, "elementary link generation probability"),
        Option("p_s", "float" + lk, (1.0,) if listed else 1.0, "swap success probability"),
        Option("tau_coh", "float" + lk, (20.0,) if listed else 20.0, "coherence time in time steps (inf allowed)"),
        Option("w0", "float", 1.0, "Werner parameter of fresh links"),
    ]


_OUTPUT_OPTIONS = [
    Option("format", "str", "csv", "output format", ("csv", "json")),
    Option("output", "str", None, "output file; unset means $REPCUT_OUTPUT_DIR/<command>.<format>, or stdout"),
    Option("workers", "int", 1, "worker processes for sweep points"),
]

_MC_OPTIONS = [
    Option("n_samples", "int", 100, "episodes per batch"),
    Option("n_batches", "int", 20, "number of batches"),
    Option("seed", "int", 0, "root seed of the episode streams"),
    Option("max_steps", "int", DEFAULT_MAX_STEPS, "step cap per episode"),
]

_MODE = Option("mode", "str", "exact", "exact solvers or Monte Carlo", ("exact", "mc"))

COMMANDS: Dict[str, List[Option]] = {
    "rate-fidelity": _chain_options(False) + [
        Option("pc_values", "float_list", tuple(_expand_range("0:1:0.01", float)), "cutoff probabilities"),
        Option("tc_values", "tc_list", tuple(range(21)), "cutoff times"),
        Option("e2e", "bool", False, "also emit the deterministic policy with end-to-end cutoff"),
        _MODE,
    ] + _MC_OPTIONS + _OUTPUT_OPTIONS,
    "skr-sweep": _chain_options(True) + [
        Option("mode", "str", "auto", "exact for n_node <= 5 and Monte Carlo beyond, or forced", ("auto", "exact", "mc")),
        Option("t_c_max", "int", None, "cutoff times searched are 0 .. t_c_max - 1"),
    ] + _MC_OPTIONS + _OUTPUT_OPTIONS,
    "skr-max": _chain_options(False) + [
        Option("mode", "str", "auto", "exact for n_node <= 5 and Monte Carlo beyond, or forced", ("auto", "exact", "mc")),
        Option("t_c_max", "int", None, "cutoff times searched are 0 .. t_c_max - 1"),
    ] + _MC_OPTIONS + _OUTPUT_OPTIONS,
    "mc-simulate": _chain_options(False) + [
        Option("policy", "str", "probabilistic", "cutoff policy",
               ("probabilistic", "deterministic", "deterministic-e2e")),
        Option("param", "float", 0.0, "p_c for the probabilistic policy, t_c otherwise"),
    ] + _MC_OPTIONS + _OUTPUT_OPTIONS,
    "crossover": _chain_options(False) + [
        Option("tc_values", "tc_list", tuple(range(21)), "cutoff times"),
        Option("f_min", "float", None, "fidelity threshold for the best-rate summary row"),
    ] + _OUTPUT_OPTIONS,
}


def _options(command: str) -> Dict[str, Option]:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    return {o.name: o for o in COMMANDS[command]}


# ----------------------------------------------------------------- run config

@dataclass(frozen=True)
class RunConfig:
    """Fully resolved options of one command, in schema order."""

    command: str
    values: Tuple[Tuple[str, Any], ...]

    def __getitem__(self, name):
        for key, value in self.values:
            if key == name:
                return value
        raise KeyError(name)

    @classmethod
    def build(cls, command: str, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """Defaults of ``command`` updated by ``overrides`` (raw strings or parsed values)."""
        opts = _options(command)
        overrides = dict(overrides or {})
        unknown = set(overrides) - set(opts)
        if unknown:
            raise ConfigError(f"unknown option(s) for {command}: {', '.join(sorted(unknown))}")
        values = []
        for name, opt in opts.items():
            values.append((name, opt.parse(overrides[name]) if name in overrides else opt.default))
        return cls(command, tuple(values))

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"command": self.command}
        out.update((k, list(v) if isinstance(v, tuple) else v) for k, v in self.values)
        return out

    def to_text(self) -> str:
        opts = _options(self.command)
        lines = [f"command = {self.command}"]
        lines += [f"{k} = {opts[k].format(v)}" for k, v in self.values]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        raw = parse_config_text(text)
        if "command" not in raw:
            raise ConfigError("config text has no 'command' entry")
        command = raw.pop("command")
        return cls.build(command, raw)


def parse_config_text(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# ------------------------------------------------------------------ evaluation

def _chain(cfg_values: Dict[str, Any], **point) -> ChainParams:
    fields = {k: point.get(k, cfg_values.get(k)) for k in ("n_node", "p_g", "p_s", "tau_coh", "w0")}
    try:
        return ChainParams(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _uses_mc(mode: str, n_node: int) -> bool:
    if mode == "mc":
        return True
    if mode == "exact" and n_node not in EXACT_NODES:
        raise ConfigError(f"exact mode supports n_node in 3..5, got {n_node}; use mode = mc")
    return n_node not in EXACT_NODES


def _mc_evaluator(v: Dict[str, Any]) -> MonteCarloEvaluator:
    return MonteCarloEvaluator(v["n_samples"], v["n_batches"], v["seed"], v["max_steps"])


def _performance(v: Dict[str, Any], params: ChainParams, policy, use_mc: bool):
    if use_mc:
        return estimate_performance(params, policy, v["n_samples"], v["n_batches"], v["seed"],
                                    max_steps=v["max_steps"]).performance
    return evaluate_exact(params, policy)


def _rate_fidelity_row(task):
    v, params, policy, use_mc = task
    perf = _performance(v, params, policy, use_mc)
    return [policy.name, policy.param, perf.rate, perf.fidelity, perf.expected_werner,
            perf.expected_delivery_time]


def _optimize_point(v: Dict[str, Any], params: ChainParams, use_mc: bool):
    evaluator = _mc_evaluator(v) if use_mc else ExactEvaluator()
    pc = maximize_over_pc(params, evaluator)
    tc = maximize_over_tc(params, v["t_c_max"], evaluator, descending=use_mc)
    trivial = _mc_evaluator(v) if use_mc else evaluator
    pc0 = trivial(params, Probabilistic(0.0)).skr
    pc1 = trivial(params, Probabilistic(1.0)).skr
    return pc, tc, pc0, pc1


def _skr_sweep_rows(task):
    v, params, use_mc = task
    pc, tc, pc0, pc1 = _optimize_point(v, params, use_mc)
    head = [params.n_node, params.p_g, params.tau_coh, params.p_s]
    std = (lambda r: r.skr_std) if use_mc else (lambda r: None)
    rows = [
        head + ["probabilistic", pc.best_param, pc.best_skr, std(pc), pc0, pc1],
        head + ["deterministic", tc.best_param, tc.best_skr, std(tc), pc0, pc1],
    ]
    return rows, tc.certified


COLUMNS = {
    "rate-fidelity": ["policy", "param_value", "rate", "fidelity", "expected_werner", "expected_delivery_time"],
    "skr-sweep": ["n_node", "p_g", "tau_coh", "p_s", "policy", "best_param", "max_skr", "skr_std",
                  "trivial_pc0_skr", "trivial_pc1_skr"],
    "skr-max": ["n_node", "p_g", "tau_coh", "p_s", "w0", "pc_best", "pc_max_skr", "pc_skr_std",
                "tc_best", "tc_max_skr", "tc_skr_std", "tc_certified", "ratio", "ratio_degenerate"],
    "mc-simulate": ["batch", "t_hat", "w_hat", "skr_hat", "skr_std", "t_stderr", "w_stderr"],
    "crossover": ["kind", "t_c", "pc_star", "rate_tc", "rate_pc_star", "fidelity_tc", "fidelity_pc_star"],
}


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _cmd_rate_fidelity(v):
    params = _chain(v)
    use_mc = _uses_mc(v["mode"], params.n_node)
    policies = [Probabilistic(pc) for pc in v["pc_values"]]
    policies += [Deterministic(tc) for tc in v["tc_values"]]
    if v["e2e"]:
        policies += [DeterministicE2E(tc) for tc in v["tc_values"]]
    return _map(_rate_fidelity_row, [(v, params, pol, use_mc) for pol in policies], v["workers"]), []


def _cmd_skr_sweep(v):
    tasks = []
    for n, p_g, tau, p_s in itertools.product(v["n_node"], v["p_g"], v["tau_coh"], v["p_s"]):
        params = _chain(v, n_node=n, p_g=p_g, tau_coh=tau, p_s=p_s)
        tasks.append((v, params, _uses_mc(v["mode"], n)))
    rows, failures = [], []
    for task, (point_rows, certified) in zip(tasks, _map(_skr_sweep_rows, tasks, v["workers"])):
        rows += point_rows
        if not certified:
            failures.append(task[1])
    return rows, failures


def _cmd_skr_max(v):
    params = _chain(v)
    use_mc = _uses_mc(v["mode"], params.n_node)
    pc, tc, _, _ = _optimize_point(v, params, use_mc)
    if tc.best_skr > 0:
        ratio, degenerate = pc.best_skr / tc.best_skr, False
    else:
        ratio, degenerate = (1.0 if pc.best_skr == 0 else math.inf), True
    std = (lambda r: r.skr_std) if use_mc else (lambda r: None)
    row = [params.n_node, params.p_g, params.tau_coh, params.p_s, params.w0,
           pc.best_param, pc.best_skr, std(pc), tc.best_param, tc.best_skr, std(tc),
           tc.certified, ratio, degenerate]
    return [row], [] if tc.certified else [params]


def _policy_from(v):
    name, param = v["policy"], v["param"]
    try:
        if name == "probabilistic":
            return Probabilistic(param)
        t_c = _parse_cutoff_time(repr(param))
        return Deterministic(t_c) if name == "deterministic" else DeterministicE2E(t_c)
    except ValueError as exc:
        raise ConfigError(f"option param: {exc}") from None


def _cmd_mc_simulate(v):
    params = _chain(v)
    res = estimate_performance(params, _policy_from(v), v["n_samples"], v["n_batches"], v["seed"],
                               max_steps=v["max_steps"])
    rows = [[j, b.t_hat, b.w_hat, b.skr_hat, None, None, None] for j, b in enumerate(res.batches)]
    perf = res.performance
    rows.append(["pooled", perf.expected_delivery_time, perf.expected_werner, res.skr, res.skr_std,
                 res.t_stderr, res.w_stderr])
    return rows, []


def _cmd_crossover(v):
    params = _chain(v)
    if params.n_node not in EXACT_NODES:
        raise ConfigError(f"crossover needs exact solvers, n_node in 3..5, got {params.n_node}")
    rows = []
    for t_c in v["tc_values"]:
        pc = equal_rate_pc(params, t_c)
        det = evaluate_exact(params, Deterministic(t_c))
        prob = evaluate_exact(params, Probabilistic(pc))
        rows.append(["crossover", t_c, pc, det.rate, prob.rate, det.fidelity, prob.fidelity])
    if v["f_min"] is not None:
        det = max_rate_above_fidelity(params, v["f_min"], "deterministic")
        prob = max_rate_above_fidelity(params, v["f_min"], "probabilistic")
        rows.append(["threshold", det.best_param, prob.best_param, det.rate, prob.rate,
                     det.fidelity, prob.fidelity])
    return rows, []


_HANDLERS = {
    "rate-fidelity": _cmd_rate_fidelity,
    "skr-sweep": _cmd_skr_sweep,
    "skr-max": _cmd_skr_max,
    "mc-simulate": _cmd_mc_simulate,
    "crossover": _cmd_crossover,
}


# --------------------------------------------------------------------- output

def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isfinite(value):
            return "%.17g" % value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return str(value)


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return _csv_cell(value)
    if isinstance(value, (list, tuple)):
        return [_json_value(x) for x in value]
    return value


def render(config: RunConfig, rows: Sequence[Sequence[Any]]) -> str:
    """Serialize rows as CSV (17 significant digits) or JSON with a provenance header."""
    columns = COLUMNS[config.command]
    if config["format"] == "json":
        meta = {
            "command": config.command,
            "version": __version__,
            "seed": dict(config.values).get("seed"),
            "config": {k: _json_value(x) for k, x in config.to_dict().items()},
        }
        body = {"metadata": meta, "columns": columns,
                "rows": [{c: _json_value(x) for c, x in zip(columns, row)} for row in rows]}
        return json.dumps(body, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(x) for x in row])
    return buf.getvalue()


def run(config: RunConfig) -> Tuple[str, list]:
    """Execute a resolved config; returns the rendered table and uncertified points."""
    rows, failures = _HANDLERS[config.command](dict(config.values))
    return render(config, rows), failures


# ------------------------------------------------------------------ argparse

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repeater-cutoffs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in COMMANDS.items():
        p = sub.add_parser(command, help=f"{command} table")
        p.add_argument("--config", help="file of key = value lines")
        for opt in opts:
            p.add_argument("--" + opt.name.replace("_", "-"), dest=opt.name,
                           default=argparse.SUPPRESS, help=f"{opt.help} (default: {opt.format(opt.default)})")
    return parser


def resolve(argv: Sequence[str]) -> RunConfig:
    """Build the RunConfig from flags and an optional config file; flags win."""
    args = vars(_build_parser().parse_args(list(argv)))
    command = args.pop("command")
    config_path = args.pop("config", None)
    merged: Dict[str, Any] = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                from_file = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        file_command = from_file.pop("command", command)
        if file_command != command:
            raise ConfigError(f"config file is for {file_command!r}, not {command!r}")
        merged.update(from_file)
    merged.update(args)
    return RunConfig.build(command, merged)


def _destination(config: RunConfig) -> Optional[str]:
    if config["output"]:
        return config["output"]
    directory = os.environ.get(OUTPUT_DIR_ENV)
    if directory:
        return os.path.join(directory, f"{config.command}.{config['format']}")
    return None


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = resolve(argv)
        text, failures = run(config)
    except ValueError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except EpisodeCapExceeded as exc:
        return _fail(EXIT_EPISODE_CAP, "episode_cap", str(exc))
    except ArithmeticError as exc:  # includes SingularMatrixError
        return _fail(EXIT_NUMERICAL, "numerical", str(exc))
    dest = _destination(config)
    if dest is None:
        sys.stdout.write(text)
    else:
        parent = os.path.dirname(dest)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    if failures:
        points = "; ".join(str(p) for p in failures)
        return _fail(EXIT_NUMERICAL, "certificate", f"cutoff-time search not certified for: {points}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
