"""Command-line front end: ``synth``, ``audit`` and ``experiment``.

Exit codes: 0 on success, 1 on usage or input errors, 2 when a numerical
stage fails. Option values resolve as flag, then config file, then (for the
seed only) the ``SYNTHFORGE_SEED`` environment variable, then the default.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .audit import SCHEMA_VERSION, compute_lid, fidelity_report
from .experiments import DEFAULT_ALPHAS, PRESETS, get_preset, preset_plan, run_trials
from .hybrid import HybridConfig
from .io import CsvError, file_digest, ingest_csv, read_table, write_in_order
from .lhs import SAMPLER_KINDS, Stage1Sampler
from .pipeline import SCALINGS, StageError, SynthesisPlan, TwoStageSynthesizer
from .regression import KERNEL_KINDS, Kernel

SEED_ENV = "SYNTHFORGE_SEED"

# config key -> converter; section names are free-form and only group keys
CONFIG_KEYS = {
    "in": str,
    "out": str,
    "synthetic": str,
    "inputs": str,
    "response": str,
    "alpha": float,
    "lid_budget": float,
    "eta": float,
    "range_width": float,
    "sampler": str,
    "kernel": str,
    "kernel_width": float,
    "lambda_grid": str,
    "seed": int,
    "trials": int,
    "threads": int,
    "scaling": str,
    "folds": int,
    "bins": int,
    "assume_uniform": "bool",
    "alphas": str,
}


class UsageError(Exception):
    def __init__(self, message: str, stage: str = "arguments"):
        super().__init__(message)
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text: str, name: str) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of numbers, got {text!r}")
    if not values:
        raise UsageError(f"{name} is empty")
    return values


def load_config(path) -> dict:
    """Flatten an INI file into ``{key: raw string}``; keys must be unique across sections."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc.strerror}", "config")
    except configparser.Error as exc:
        raise UsageError(f"malformed config file {path!r}: {exc}", "config")
    flat: dict = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r} in section [{section}]", "config")
            if key in flat:
                raise UsageError(f"config key {key!r} is set in more than one section", "config")
            flat[key] = value
    if "alpha" in flat and "lid_budget" in flat:
        raise UsageError("config sets both alpha and lid_budget; keep one", "config")
    return flat


class Settings:
    """Resolved option values with flag > config > environment > default precedence."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}
        if getattr(args, "alpha", None) is not None and getattr(args, "lid_budget", None) is not None:
            raise UsageError("--alpha and --lid-budget are mutually exclusive; pass only one")
        # alpha and lid_budget act as a single key: a flag for either hides both config values
        if getattr(args, "alpha", None) is not None or getattr(args, "lid_budget", None) is not None:
            self.config.pop("alpha", None)
            self.config.pop("lid_budget", None)

    def get(self, key: str, default=None):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.config:
            return self._convert(key, self.config[key])
        if key == "seed" and os.environ.get(SEED_ENV, "").strip():
            raw = os.environ[SEED_ENV].strip()
            try:
                return int(raw)
            except ValueError:
                raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}", "config")
        return default

    @staticmethod
    def _convert(key: str, raw: str):
        conv = CONFIG_KEYS[key]
        raw = raw.strip()
        if conv == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise UsageError(f"config key {key!r} must be a boolean, got {raw!r}", "config")
        try:
            return conv(raw)
        except ValueError:
            raise UsageError(f"config key {key!r} has invalid value {raw!r}", "config")


def _choice(value: str, allowed, name: str) -> str:
    if value.lower() not in allowed:
        raise UsageError(f"{name} must be one of {', '.join(allowed)}, got {value!r}")
    return value.lower()


def build_plan(settings: Settings, default_alpha=None, default_eta: float = 0.001) -> SynthesisPlan:
    """Assemble a plan from resolved settings; usage errors name the offending option."""
    alpha = settings.get("alpha")
    budget = settings.get("lid_budget")
    if alpha is None and budget is None:
        alpha = default_alpha
    sampler = _choice(settings.get("sampler", "sh"), SAMPLER_KINDS, "--sampler")
    kernel = _choice(settings.get("kernel", "wendland"), KERNEL_KINDS, "--kernel")
    scaling = _choice(settings.get("scaling", "none"), SCALINGS, "--scaling")
    try:
        hybrid = HybridConfig(
            alpha=alpha if alpha is not None or budget is not None else 0.5,
            lid_budget=budget,
            eta=settings.get("eta", default_eta),
            range_width=settings.get("range_width"),
        )
        plan = SynthesisPlan(
            sampler=Stage1Sampler(sampler),
            hybrid=hybrid,
            kernel=Kernel(kernel, settings.get("kernel_width", 1.0)),
            seed=settings.get("seed", 0),
            scaling=scaling,
            folds=settings.get("folds", 5),
            bins=settings.get("bins", 50),
            assume_uniform=bool(settings.get("assume_uniform", False)),
        )
        grid = settings.get("lambda_grid")
        if grid is not None:
            values = _float_list(grid, "--lambda-grid")
            if any(v < 0 for v in values):
                raise ValueError("--lambda-grid values must be non-negative")
            plan = replace(plan, lambda_grid=values)
    except ValueError as exc:
        raise UsageError(str(exc), "config")
    return plan


def _selectors(settings: Settings):
    inputs = settings.get("inputs")
    inputs = [s.strip() for s in inputs.split(",") if s.strip()] if inputs else None
    return inputs, settings.get("response")


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _output_prefix(settings: Settings, fallback: str) -> str:
    out = settings.get("out") or fallback
    return out[:-4] if out.endswith(".csv") else out


def command_synth(args) -> int:
    start = time.perf_counter()
    settings = Settings(args)
    plan = build_plan(settings)
    source = settings.get("in")
    if not source:
        raise UsageError("--in is required")
    inputs, response = _selectors(settings)
    try:
        data = ingest_csv(source, inputs, response)
        header, _ = read_table(source)
    except CsvError as exc:
        raise UsageError(str(exc), "ingest")
    plan = replace(plan, input_columns=tuple(data.names()), response_column=data.response_name)

    synth = TwoStageSynthesizer(plan).fit(data)
    alpha = synth.resolve_alpha()
    synthetic = synth.generate(alpha)
    privacy = synth.privacy_report(synthetic, alpha)
    fidelity = synth.fidelity_report(synthetic)

    prefix = _output_prefix(settings, str(Path(source).with_suffix("")) + ".synthetic")
    outputs = {
        "data": prefix + ".csv",
        "privacy": prefix + ".privacy.json",
        "fidelity": prefix + ".fidelity.json",
        "manifest": prefix + ".manifest.json",
    }
    try:
        write_in_order(outputs["data"], synthetic, header)
        _write_json(outputs["privacy"], privacy.to_dict())
        _write_json(outputs["fidelity"], fidelity.to_dict())
        manifest = {
            "schemaVersion": SCHEMA_VERSION,
            "tool": "synthforge",
            "version": __version__,
            "plan": plan.to_dict(),
            "input": {
                "path": str(source),
                "sha256": file_digest(source),
                "rows": data.n,
                "inputColumns": list(data.names()),
                "responseColumn": data.response_name,
            },
            "solvedAlpha": alpha,
            "lambda": synth.response_model.lam,
            "bandwidths": None if synth.marginals is None else [m.bandwidth for m in synth.marginals],
            "outputs": outputs,
            "timing": {
                "wallClockSeconds": time.perf_counter() - start,
                "stages": dict(synth.timings),
            },
        }
        _write_json(outputs["manifest"], manifest)
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}", "write")
    print(f"wrote {outputs['data']} (alpha={alpha:.6g}, LID={privacy.lid_percent:.4g}%)")
    return 0


def command_audit(args) -> int:
    settings = Settings(args)
    original, other = settings.get("in"), settings.get("synthetic")
    if not original or not other:
        raise UsageError("audit needs --in and --synthetic")
    inputs, response = _selectors(settings)
    try:
        x = ingest_csv(original, inputs, response, require_response=False)
        s = ingest_csv(other, inputs, response, require_response=False)
    except CsvError as exc:
        raise UsageError(str(exc), "ingest")
    if x.names() != s.names():
        raise UsageError("the two files select different columns", "ingest")
    if x.n != s.n:
        raise UsageError(
            f"row counts differ ({x.n} vs {s.n}); LID compares records row by row", "audit"
        )
    eta = settings.get("eta", 0.001)
    try:
        privacy = compute_lid(x.inputs, s.inputs, eta)
        fidelity = fidelity_report(x.inputs, s.inputs, settings.get("bins", 50), x.names())
    except ValueError as exc:
        raise UsageError(str(exc), "audit")
    out = settings.get("out")
    if out:
        prefix = _output_prefix(settings, out)
        _write_json(prefix + ".privacy.json", privacy.to_dict())
        _write_json(prefix + ".fidelity.json", fidelity.to_dict())
    else:
        json.dump({"privacy": privacy.to_dict(), "fidelity": fidelity.to_dict()}, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def command_experiment(args) -> int:
    try:
        preset = get_preset(args.preset)
    except KeyError:
        raise UsageError(
            f"unknown preset {args.preset!r}; available presets: {', '.join(PRESETS)}", "experiment"
        )
    settings = Settings(args)
    if settings.get("lid_budget") is not None:
        raise UsageError("experiments sweep alpha; --lid-budget is not supported here")
    plan = build_plan(settings, default_alpha=0.5, default_eta=preset.default_eta)
    base = preset_plan(preset.name, plan.sampler.kind)
    plan = replace(base, hybrid=replace(base.hybrid, eta=plan.hybrid.eta), kernel=plan.kernel,
                   lambda_grid=plan.lambda_grid, folds=plan.folds, bins=plan.bins,
                   scaling=plan.scaling, seed=plan.seed)
    alphas_text = settings.get("alphas")
    if alphas_text is not None:
        alphas = _float_list(alphas_text, "--alphas")
    elif settings.get("alpha") is not None:
        alphas = (settings.get("alpha"),)
    else:
        alphas = DEFAULT_ALPHAS
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise UsageError("alphas must lie in [0, 1]")
    trials = settings.get("trials", 20)
    if trials < 1:
        raise UsageError("--trials must be at least 1")
    threads = settings.get("threads") or os.cpu_count() or 1
    table = run_trials(preset.name, plan, trials, base_seed=plan.seed, alphas=alphas,
                       threads=threads)
    out = settings.get("out")
    if out:
        prefix = _output_prefix(settings, out)
        table.write_csv(prefix + ".csv")
        table.write_json(prefix + ".json")
        print(f"wrote {prefix}.csv and {prefix}.json ({len(table.rows)} rows)")
    else:
        table.write_csv(sys.stdout)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with default option values")
    p.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--eta", type=float, help="attack tolerance for LID")
    p.add_argument("--bins", type=int, help="histogram bins for the TV norm (default 50)")
    p.add_argument("--out", help="output path prefix")


def _add_plan(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="hybrid mixing weight in [0, 1]")
    p.add_argument("--sampler", help=f"stage-1 sampler: {'|'.join(SAMPLER_KINDS)}")
    p.add_argument("--kernel", help=f"stage-2 kernel: {'|'.join(KERNEL_KINDS)}")
    p.add_argument("--kernel-width", dest="kernel_width", type=float,
                   help="Gaussian kernel length scale (default 1.0)")
    p.add_argument("--lambda-grid", dest="lambda_grid", help="comma-separated ridge parameters")
    p.add_argument("--scaling", help=f"input scaling: {'|'.join(SCALINGS)}")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    p.add_argument("--threads", type=int, help="worker threads (default: logical cores)")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="synthforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    synth = sub.add_parser("synth", help="generate a synthetic copy of a CSV dataset")
    _add_common(synth)
    _add_plan(synth)
    synth.add_argument("--in", dest="in", help="input CSV with a header row")
    synth.add_argument("--inputs", help="comma-separated input columns (names or 0-based indices)")
    synth.add_argument("--response", help="response column (default: last column)")
    synth.add_argument("--lid-budget", dest="lid_budget", type=float,
                       help="target LID in percent; alpha is solved from it")
    synth.add_argument("--range-width", dest="range_width", type=float,
                       help="attribute range width for the LID bound (default: narrowest column range)")
    synth.add_argument("--assume-uniform", dest="assume_uniform", action="store_const", const=True,
                       help="assert uniform marginals so the LID bound is reported as exact")
    synth.add_argument("--trials", type=int, help=argparse.SUPPRESS)
    synth.set_defaults(func=command_synth)

    audit = sub.add_parser("audit", help="privacy and fidelity of one CSV against another")
    _add_common(audit)
    audit.add_argument("--in", dest="in", help="original CSV")
    audit.add_argument("--synthetic", help="perturbed CSV, row-aligned with --in")
    audit.add_argument("--inputs", help="comma-separated columns to compare (default: all)")
    audit.add_argument("--response", help="column to leave out of the comparison")
    audit.set_defaults(func=command_audit)

    exp = sub.add_parser("experiment", help="run a named experiment preset over trials")
    exp.add_argument("preset", help=f"one of: {', '.join(PRESETS)}")
    _add_common(exp)
    _add_plan(exp)
    exp.add_argument("--alphas", help="comma-separated alpha values (default 0,0.2,0.5,0.8,1)")
    exp.add_argument("--trials", type=int, help="number of trials (default 20)")
    exp.set_defaults(func=command_experiment)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a command is required: synth, audit or experiment")
        return args.func(args)
    except UsageError as exc:
        print(f"synthforge: error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"synthforge: error in stage '{exc.stage}': {exc.error}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as exc:
        print(f"synthforge: error in stage 'run': {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
