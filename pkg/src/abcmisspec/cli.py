"""Command-line entry point: ``abcmisspec <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODELS, PRESETS, StudyConfig, canonical_json, load_config, preset
from .diagnostics import KINDS
from .experiments import (
    fit,
    posterior_table,
    run_application,
    run_diagnostic,
    run_power_study,
)
from .io import RunManifest, load_columns, load_returns_csv
from .models import (
    EndogGkParams,
    GkParams,
    Ma1GkParams,
    RickerParams,
    gk_quantile,
    simulate_gk_regression,
    simulate_ma1_gk,
    simulate_normal,
    simulate_ricker,
)
from .rng import SeedPath, standard_normal

log = logging.getLogger("abcmisspec")

THREADS_ENV = "ABC_SPECCHECK_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _study_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", type=Path, help="StudyConfig JSON or a previous run manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--N", type=int, dest="N", help="reference-table size")
    p.add_argument("--alpha", type=float, help="ABC acceptance fraction")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="abcmisspec", description="Misspecification diagnostics for ABC.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("power", "rejection-frequency study"), ("timing", "diagnostic wall-clock study")):
        p = sub.add_parser(name, help=help_)
        _study_options(p)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--replications", type=int)

    p = sub.add_parser("fit-returns", help="fit the MA(1) g-and-k model to a return series")
    _study_options(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--prices", action="store_true", help="input is date,price rows")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("diagnose", help="fit one dataset and run diagnostics")
    _study_options(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--prices", action="store_true")
    p.add_argument("--test", default="all", help="'all' or a comma list of " + ",".join(KINDS))
    p.add_argument("--out", type=Path)

    p = sub.add_parser("simulate", help="write one pseudo-dataset as CSV")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--params", default="{}", help="JSON object of parameter values")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    return parser


def _threads(args) -> int:
    if args.threads is not None:
        t = args.threads
    else:
        env = os.environ.get(THREADS_ENV)
        try:
            t = int(env) if env else 1
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    if t < 1:
        raise UsageError("--threads must be >= 1")
    return t


def _seed(args, config_seed: int | None) -> int:
    if args.seed is not None:
        return args.seed
    if config_seed is not None:
        return config_seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def resolve_config(args, default_model: str | None = None) -> StudyConfig:
    """Config from --config, else --preset, else the preset named by --model."""
    config_seed = None
    if args.config is not None:
        try:
            cfg = load_config(args.config)
            raw = json.loads(args.config.read_text())
        except (OSError, ValueError, TypeError) as exc:
            raise UsageError(f"cannot load config {args.config}: {exc}") from None
        raw = raw.get("resolved_config", raw)
        config_seed = raw.get("seed")
    else:
        name = args.preset or args.model or default_model
        if name is None:
            raise UsageError("one of --config, --preset or --model is required")
        cfg = preset(name)
    if args.model and args.model != cfg.model:
        raise UsageError(f"--model {args.model} conflicts with config model {cfg.model}")
    overrides = {"seed": _seed(args, config_seed)}
    if getattr(args, "replications", None) is not None:
        overrides["replications"] = args.replications
    d = {**cfg.to_dict(), **overrides}
    if args.N is not None:
        d["abc"] = {**d["abc"], "N": args.N}
    if args.alpha is not None:
        d["abc"] = {**d["abc"], "alpha": args.alpha}
    try:
        return StudyConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


class _Run:
    """Manifest bookkeeping around one command."""

    def __init__(self, args, argv, cfg: StudyConfig | None, seed: int, threads: int = 1,
                 manifest_path: Path | None = None):
        self.out = args.out
        self.outputs: list[Path] = []
        self.manifest = RunManifest(
            command=args.command,
            argv=list(argv),
            seed=seed,
            config_path=None if getattr(args, "config", None) is None else str(args.config),
            resolved_config=None if cfg is None else cfg.to_dict(),
            threads=threads,
        )
        self.path = manifest_path
        if self.path is None and self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            self.path = self.out / "manifest.json"
        if self.path is not None:
            self.manifest.write(self.path)

    def emit(self, name: str, text: str) -> None:
        path = self.out / name
        path.write_text(text)
        self.outputs.append(path)

    def close(self, error: str | None = None) -> None:
        if self.path is not None:
            self.manifest.finalize(self.path, self.outputs, error)


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        log.info("%d/%d replications", done, total)


def cmd_power(args, argv) -> int:
    cfg = resolve_config(args)
    threads = _threads(args)
    run = _Run(args, argv, cfg, cfg.seed, threads)
    try:
        res = run_power_study(cfg, threads=threads, progress=_progress)
        if args.command == "power":
            run.emit("power.csv", res.power_csv())
            run.emit("records.csv", res.records_csv())
            run.emit("power.json", res.to_json())
        else:
            run.emit("timing.csv", res.timing_csv())
            run.emit("timing.json", canonical_json({"config": cfg.to_dict(), "rows": res.timing_rows()}))
    except Exception as exc:
        run.close(f"{type(exc).__name__}: {exc}")
        raise
    run.close()
    return 0


def _load_data(model: str, path: Path, prices: bool):
    if model == "returns":
        return load_returns_csv(path, prices=prices)
    if model == "gk":
        return load_columns(path, ncols=2)
    data = load_columns(path, ncols=1)
    if model == "ricker" and (np.any(data < 0) or np.any(data != np.round(data))):
        raise ValueError(f"{path}: Ricker data must be non-negative counts")
    return data


def _tests(spec: str) -> list[str]:
    if spec == "all":
        return list(KINDS)
    tests = [t.strip() for t in spec.split(",") if t.strip()]
    bad = [t for t in tests if t not in KINDS]
    if bad or not tests:
        raise UsageError(f"unknown tests {bad}; choose from all,{','.join(KINDS)}")
    return tests


def cmd_fit_returns(args, argv) -> int:
    cfg = resolve_config(args, default_model="returns")
    if cfg.model != "returns":
        raise UsageError("fit-returns needs a returns config")
    threads = _threads(args)
    run = _Run(args, argv, cfg, cfg.seed, threads)
    try:
        y = load_returns_csv(args.data, prices=args.prices)
        res = run_application(y, cfg, threads=threads)
        run.emit("posterior.csv", res.posterior_csv())
        run.emit("diagnostics.json", canonical_json({k: r.to_dict() for k, r in res.reports.items()}))
    except Exception as exc:
        run.close(f"{type(exc).__name__}: {exc}")
        raise
    run.close()
    return 0


def cmd_diagnose(args, argv) -> int:
    cfg = resolve_config(args)
    cfg = replace(cfg, tests=_tests(args.test))
    threads = _threads(args)
    run = _Run(args, argv, cfg, cfg.seed, threads)
    try:
        data = _load_data(cfg.model, args.data, args.prices)
        n = len(data)
        root = SeedPath(cfg.seed)
        f = fit(cfg, data, n, root.child(1), threads=threads)
        reports = {
            kind: run_diagnostic(kind, cfg, f, n, root.child(2, KINDS.index(kind)))
            for kind in cfg.tests
        }
        text = canonical_json({
            "posterior": posterior_table(f),
            "reports": {k: r.to_dict() for k, r in reports.items()},
        })
        if args.out is not None:
            run.emit("diagnostics.json", text)
        else:
            sys.stdout.write(text)
    except Exception as exc:
        run.close(f"{type(exc).__name__}: {exc}")
        raise
    run.close()
    return 0


def simulate_dataset(model: str, params: dict, n: int, seed: int):
    """One pseudo-dataset as (column names, 2-d array)."""
    if n < 1:
        raise UsageError("--n must be positive")
    p = dict(params)
    try:
        if model == "normal":
            y = simulate_normal(p.pop("theta", 0.0), p.pop("sigma", 1.0), n, seed)
            cols, data = ["y"], y[:, None]
        elif model == "gk":
            gk = GkParams(p.pop("a", 0.0), p.pop("b", 1.0), p.pop("g", 0.0), p.pop("k", 0.0), p.pop("c", 0.8))
            if "beta" in p or "rho" in p:
                params_ = EndogGkParams(p.pop("beta", 0.5), p.pop("rho", 0.0), gk, gk)
                x, y = simulate_gk_regression(params_, n, seed)
                cols, data = ["x", "y"], np.column_stack([x, y])
            else:
                z = standard_normal(SeedPath(seed).generator(), n)
                cols, data = ["y"], gk_quantile(z, gk)[:, None]
        elif model == "ricker":
            fields = ("r", "phi", "sigma1", "sigma2", "k_break", "N1")
            kw = {k: p.pop(k) for k in fields if k in p}
            if "sigma" in p:
                s = p.pop("sigma")
                kw.setdefault("sigma1", s)
                kw.setdefault("sigma2", s)
            cols, data = ["y"], simulate_ricker(RickerParams(**kw, T=n), seed)[:, None]
        else:
            gk = GkParams(p.pop("a", 0.0), p.pop("b", 1.0), p.pop("g", 0.0), p.pop("k", 0.0), p.pop("c", 0.8))
            y = simulate_ma1_gk(Ma1GkParams(p.pop("theta1", 0.0), gk), n, seed)
            cols, data = ["return"], y[:, None]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad --params: {exc}") from None
    if p:
        raise UsageError(f"unknown parameters for {model}: {sorted(p)}")
    return cols, data


def cmd_simulate(args, argv) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--params is not valid JSON: {exc}") from None
    if not isinstance(params, dict):
        raise UsageError("--params must be a JSON object")
    seed = _seed(args, None)
    cols, data = simulate_dataset(args.model, params, args.n, seed)
    lines = [",".join(cols)] + [",".join(repr(float(v)) for v in row) for row in data]
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
        return 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    run = _Run(args, argv, None, seed, manifest_path=args.out.with_name(args.out.name + ".manifest.json"))
    run.outputs.append(args.out)
    args.out.write_text(text)
    run.close()
    return 0


COMMANDS = {
    "power": cmd_power,
    "timing": cmd_power,
    "fit-returns": cmd_fit_returns,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"abcmisspec: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("runtime error", exc_info=True)
        print(f"abcmisspec: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
