"""Scenario files, reports and the ``fpabsorb`` command.

A scenario file is INI text with typed sections::

    [scenario]   name, kind, seed, description
    [solver]     SolverConfig fields
    [mc]         McConfig fields
    [initial]    preset plus its parameters
    [analysis]   pipeline parameters (tolerances, fit options)

Values are read as int, float, bool, comma lists or strings, in that order
of preference.  Built-in scenarios ship in ``fpabsorb/scenarios``.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import re
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, specfun
from .grid_solver import CFLError, SolverAbort, SolverConfig
from .particle_mc import McConfig
from .pipelines import PIPELINES, PRESETS, Results

__all__ = [
    "ACCEPTANCE",
    "ConfigError",
    "Scenario",
    "RunResult",
    "parse_config",
    "load_scenario",
    "builtin_scenarios",
    "run_scenario",
    "emit_report",
    "main",
]

THREADS_ENV = "FPABSORB_THREADS"

# acceptance criterion number -> the one shipped scenario that decides it
ACCEPTANCE = {
    1: "mp-suite",
    2: "oracle-agreement",
    3: "decay",
    4: "half-line",
    5: "kernel-g",
    6: "boundary-limit",
    7: "boundary-density",
    8: "specfun",
    9: "compare-fhat",
    10: "holder",
    11: "sequence-lemma",
    12: "escape",
}
_SECTIONS = ("scenario", "solver", "mc", "initial", "analysis")


class ConfigError(ValueError):
    """Bad scenario file; the message names the file, line, section and key."""

    def __init__(self, msg, source="<config>", line=None, section=None, key=None):
        where = source if line is None else f"{source}:{line}"
        if section:
            where += f": [{section}]"
        if key:
            where += f" {key}"
        super().__init__(f"{where}: {msg}")
        self.line, self.section, self.key = line, section, key


_INT = re.compile(r"[+-]?\d+$")


def _literal(text):
    s = text.strip()
    if "," in s:
        return [_literal(p) for p in s.split(",") if p.strip()]
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", ""):
        return None
    if _INT.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def _locate(text, section, key):
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line):
            return n
    return None


def _coerce(dc, values, text, source, section):
    """Check keys and value types against dataclass ``dc``."""
    fields = {f.name: f for f in dataclasses.fields(dc)}
    out = {}
    for key, val in values.items():
        line = _locate(text, section, key)
        if key not in fields:
            raise ConfigError("unknown key", source, line, section, key)
        tp = fields[key].type
        kind = tp if isinstance(tp, str) else getattr(tp, "__name__", str(tp))
        try:
            if "tuple" in kind:
                val = tuple(float(v) for v in (val if isinstance(val, list) else [val]))
            elif val is None:
                if "None" not in kind:
                    raise TypeError("value required")
            elif kind.startswith("int"):
                if isinstance(val, bool) or not isinstance(val, int):
                    raise TypeError(f"expected an integer, got {val!r}")
            elif kind.startswith("float"):
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise TypeError(f"expected a number, got {val!r}")
                val = float(val)
            elif kind.startswith("bool"):
                if not isinstance(val, bool):
                    raise TypeError(f"expected true/false, got {val!r}")
            elif kind.startswith("str"):
                val = str(val)
        except TypeError as exc:
            raise ConfigError(str(exc), source, line, section, key) from None
        out[key] = val
    return out


def parse_config(text: str, source: str = "<config>") -> dict:
    """INI text -> {section: {key: typed value}}."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(exc.message.splitlines()[0] if hasattr(exc, "message") else str(exc),
                          source, line) from None
    out = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section (expected one of {', '.join(_SECTIONS)})",
                              source, _locate_section(text, sec), sec)
        out[sec] = {k: _literal(v) for k, v in cp.items(sec)}
    return out


def _locate_section(text, sec):
    for n, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*\[{re.escape(sec)}\]", line):
            return n
    return None


@dataclass
class Scenario:
    name: str
    kind: str
    seed: int = 0
    solver: SolverConfig | None = None
    mc: McConfig | None = None
    initial: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    out_dir: Path = Path("out")
    config: dict = field(default_factory=dict)
    description: str = ""


def scenario_from_config(cfg: dict, text: str = "", source: str = "<config>",
                         seed: int | None = None, out: str | Path | None = None,
                         kind: str | None = None) -> Scenario:
    head = cfg.get("scenario", {})
    name = str(head.get("name", Path(source).stem))
    kind = kind or head.get("kind", "solve")
    if kind not in PIPELINES:
        raise ConfigError(f"unknown kind {kind!r}", source, _locate(text, "scenario", "kind"),
                          "scenario", "kind")
    for key in head:
        if key not in ("name", "kind", "seed", "description"):
            raise ConfigError("unknown key", source, _locate(text, "scenario", key), "scenario", key)
    seed = int(head.get("seed", 0)) if seed is None else int(seed)
    preset = cfg.get("initial", {}).get("preset", "zero")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}", source,
                          _locate(text, "initial", "preset"), "initial", "preset")
    solver = mc = None
    try:
        if "solver" in cfg:
            solver = SolverConfig(**_coerce(SolverConfig, cfg["solver"], text, source, "solver"))
        if "mc" in cfg:
            mc = McConfig(**_coerce(McConfig, cfg["mc"], text, source, "mc"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), source) from None
    echo = json.loads(json.dumps(cfg))
    echo.setdefault("scenario", {})["seed"] = seed
    return Scenario(name=name, kind=kind, seed=seed, solver=solver, mc=mc,
                    initial=dict(cfg.get("initial", {})), analysis=dict(cfg.get("analysis", {})),
                    out_dir=Path(out) if out else Path("out") / name, config=echo,
                    description=str(head.get("description", "")))


def builtin_scenarios() -> list:
    files = resources.files("fpabsorb").joinpath("scenarios")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".ini"))


def _scenario_text(name_or_path):
    p = Path(name_or_path)
    if p.suffix == ".ini" or p.exists():
        if not p.exists():
            raise ConfigError("no such file", str(p))
        return p.read_text(encoding="utf-8"), str(p)
    res = resources.files("fpabsorb").joinpath("scenarios", f"{name_or_path}.ini")
    if not res.is_file():
        raise ConfigError(f"no built-in scenario named {name_or_path!r}; "
                          f"available: {', '.join(builtin_scenarios())}", str(name_or_path))
    return res.read_text(encoding="utf-8"), f"{name_or_path}.ini"


def load_scenario(name_or_path, seed=None, out=None, kind=None, overrides=None) -> Scenario:
    """Scenario from a file path or the name of a built-in scenario.

    ``overrides`` is {section: {key: value}} applied after parsing.
    """
    text, source = _scenario_text(name_or_path)
    cfg = parse_config(text, source)
    for sec, vals in (overrides or {}).items():
        cfg.setdefault(sec, {}).update(vals)
    return scenario_from_config(cfg, text, source, seed, out, kind)


# ---------------------------------------------------------------------------
# reports

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if x is None or isinstance(x, (int, str)):
        return x
    return repr(x)


def _criteria(results, scenario):
    if scenario is None or not results.checks:
        return {}
    nums = [n for n, name in ACCEPTANCE.items() if name == scenario.name]
    key = f"criterion {nums[0]}" if nums else scenario.name
    return {key: results.passed}


def emit_report(results: Results | None, scenario: Scenario | None = None,
                status: int | None = None) -> str:
    """One JSON document: config echo, fits, margins, checks, version, seed."""
    results = results or Results()
    doc = {
        "tool": "fpabsorb",
        "version": __version__,
        "scenario": scenario.name if scenario else None,
        "kind": scenario.kind if scenario else None,
        "seed": scenario.seed if scenario else None,
        "config": scenario.config if scenario else {},
        "fits": results.fits,
        "margins": results.margins,
        "checks": results.checks,
        "criteria": _criteria(results, scenario),
        "artifacts": results.artifacts,
        "timings": results.timings,
        "status": status,
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class RunResult:
    status: int
    report: dict
    out_dir: Path
    error: str | None = None


def run_scenario(scenario: Scenario, fmt: str = "csv") -> RunResult:
    """Run the pipeline and write report.json (plus tables) to scenario.out_dir.

    Status 0 when every check passes, 1 when a check fails, 2 on a CFL
    violation, 3 on a numerical abort (diagnostics.json written).
    """
    out = Path(scenario.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = Results()
    status, error = 0, None
    try:
        PIPELINES[scenario.kind](scenario, res, out, fmt)
        status = 0 if res.passed else 1
    except CFLError as exc:
        status, error = 2, f"CFL violation: {exc}"
        res.check("cfl", False, detail=str(exc))
    except (SolverAbort, ArithmeticError, FloatingPointError) as exc:
        status, error = 3, f"numerical abort: {exc}"
        diag = {"error": str(exc), "type": type(exc).__name__,
                "diagnostics": getattr(exc, "diagnostics", None),
                "traceback": traceback.format_exc()}
        (out / "diagnostics.json").write_text(json.dumps(_jsonable(diag), indent=2) + "\n",
                                              encoding="utf-8")
        res.artifacts.append("diagnostics.json")
        res.check("numerics", False, detail=str(exc))
    text = emit_report(res, scenario, status)
    (out / "report.json").write_text(text, encoding="utf-8")
    return RunResult(status, json.loads(text), out, error)


# ---------------------------------------------------------------------------
# command line

def _run_named(args):
    name, seed, out, fmt = args
    sc = load_scenario(name, seed=seed, out=out)
    r = run_scenario(sc, fmt)
    return name, r.status, r.error


def _print_summary(r: RunResult, stream=sys.stdout):
    for name, c in r.report["checks"].items():
        flag = "PASS" if c["passed"] else "FAIL"
        val = c.get("value")
        print(f"  {flag} {name}" + (f"  value={val}" if val is not None else ""), file=stream)
    print(f"{r.report['scenario']}: status {r.status}  ({r.out_dir})", file=stream)
    if r.error:
        print(r.error, file=sys.stderr)


def _scenario_cmd(args, default, kind=None, overrides=None):
    sc = load_scenario(args.config or default, seed=args.seed, out=args.out, kind=kind,
                       overrides=overrides)
    r = run_scenario(sc, args.format)
    _print_summary(r)
    return r.status


def cmd_specfun(args):
    fn = args.function
    vals = args.args
    if fn == "gamma":
        out = specfun.gamma_fn(*vals)
    elif fn == "kummer_m":
        out = specfun.kummer_m(*vals)
    elif fn == "tricomi_u":
        out = specfun.tricomi_u(*vals)
    elif fn == "lambda":
        out = specfun.lambda_profile(*vals)
    else:
        out = specfun.k_plus(*vals)
    if args.format == "json":
        print(json.dumps({"function": fn, "args": vals, "value": out}))
    else:
        print(format(out, ".17g"))
    return 0


def cmd_analyze(args):
    """Decay fit (or survival exponent) from a mass.csv or survival.csv table."""
    path = Path(args.input)
    data = np.genfromtxt(path, delimiter=",", names=True)
    t = np.atleast_1d(data["t"])
    y = np.atleast_1d(data["mass"] if "mass" in data.dtype.names else data["alive_frac"])
    if not np.all(np.isfinite(t)) or not np.all(np.isfinite(y)):
        raise ValueError(f"{path}: non-numeric rows in the table")
    res = Results()
    if y[0] > 0:
        y = y / y[0]
    if args.power_law:
        sel = (t >= args.t_lo) & (y > 0)
        from scipy import stats

        r = stats.linregress(np.log(t[sel]), np.log(y[sel]))
        res.fits["survival_exponent"] = float(r.slope)
        res.fits["survival_exponent_stderr"] = float(r.stderr)
    elif y[0] > 0:
        from .analysis import fit_exponential

        fit = fit_exponential(t, y)
        res.fits["decay"] = fit.to_dict()
        res.fits["kappa"] = fit.kappa
    sc = Scenario(name=path.stem, kind="analyze", seed=args.seed or 0,
                  config={"analyze": {"input": str(path)}})
    text = emit_report(res, sc, 0)
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{path.stem}_analysis.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_batch(args):
    names = args.scenarios or builtin_scenarios()
    if len(set(names)) != len(names):
        print("batch: scenario names must be unique", file=sys.stderr)
        return 2
    root = Path(args.out or "out")
    jobs = [(n, args.seed, root / Path(n).stem, args.format) for n in names]
    workers = int(os.environ.get(THREADS_ENV, "1"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_named, jobs))
    else:
        results = [_run_named(j) for j in jobs]
    worst = 0
    for name, status, err in results:
        print(f"{'PASS' if status == 0 else 'FAIL'} {name} (status {status})"
              + (f": {err}" if err else ""))
        worst = max(worst, status)
    return worst


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (INI)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="table format")

    p = argparse.ArgumentParser(prog="fpabsorb",
                                description="Kinetic Fokker-Planck with absorbing walls.")
    p.add_argument("--version", action="version", version=f"fpabsorb {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common], help="grid solver run")
    sub.add_parser("mc", parents=[common], help="Langevin particle run")

    k = sub.add_parser("kernel", help="fundamental solution and boundary layer")
    ks = k.add_subparsers(dest="action", required=True)
    cl = ks.add_parser("check-limit", parents=[common], help="boundary limit of the layer potential")
    cl.add_argument("--v", type=float)
    cl.add_argument("--t", type=float)
    sl = ks.add_parser("solve-lambda", parents=[common], help="boundary density by Picard iteration")
    sl.add_argument("--window", type=float, nargs=2)
    sl.add_argument("--t0", type=float)

    s = sub.add_parser("specfun", help="special functions")
    ss = s.add_subparsers(dest="action", required=True)
    ev = ss.add_parser("eval", parents=[common], help="point evaluation")
    ev.add_argument("function", choices=("gamma", "kummer_m", "tricomi_u", "lambda", "k_plus"))
    ev.add_argument("args", type=float, nargs="+")

    b = sub.add_parser("barriers", help="super- and sub-solutions")
    bs = b.add_subparsers(dest="action", required=True)
    bz = bs.add_parser("build-z0", parents=[common], help="self-similar super-solution")
    bz.add_argument("--alpha", type=float)
    bs.add_parser("check-compare", parents=[common], help="solver output against C f-hat")

    an = sub.add_parser("analyze", parents=[common], help="fit a mass or survival table")
    an.add_argument("input")
    an.add_argument("--power-law", action="store_true", help="fit a survival exponent")
    an.add_argument("--t-lo", type=float, default=10.0)

    bt = sub.add_parser("batch", parents=[common], help="run several scenarios")
    bt.add_argument("scenarios", nargs="*", help="built-in names or INI paths (default: all)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _scenario_cmd(args, "smoke", kind="solve")
        if args.command == "mc":
            return _scenario_cmd(args, "mc-smoke", kind="mc")
        if args.command == "kernel" and args.action == "check-limit":
            ov = {k: v for k, v in (("v", args.v), ("t", args.t)) if v is not None}
            return _scenario_cmd(args, "boundary-limit", overrides={"analysis": ov})
        if args.command == "kernel":
            ov = {}
            if args.window:
                ov["window"] = list(args.window)
            if args.t0 is not None:
                ov["t0"] = args.t0
            return _scenario_cmd(args, "boundary-density", overrides={"analysis": ov})
        if args.command == "specfun":
            return cmd_specfun(args)
        if args.command == "barriers" and args.action == "build-z0":
            ov = {"alpha": args.alpha} if args.alpha is not None else {}
            return _scenario_cmd(args, "build-z0", overrides={"analysis": ov})
        if args.command == "barriers":
            return _scenario_cmd(args, "compare-fhat")
        if args.command == "analyze":
            return cmd_analyze(args)
        return cmd_batch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
