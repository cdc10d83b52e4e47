"""Command-line entry point.

Exit codes: 0 success, 1 assertion failure, 2 configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import SEED_ENV, ConfigError, load_config, model_setup, study_config
from .experiments.misspec import MisspecStudyConfig, ProjectionError, run_misspec_study
from .experiments.rates import run_rate_study
from .experiments.report import emit_report
from .model import ModelError, generate_dataset, sparse_truth
from .oracle.lemmas import CHECKS, CSV_HEADER, default_suite, run_lemma_suite, suite_passed
from .rng import derive_seed
from .samplers import Functional, SamplerError, chain_diagnostics, posterior_functional

log = logging.getLogger("fracbayes")

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
DEFAULT_OUTPUT_DIR = "fracbayes_output"


class RuntimeFailure(RuntimeError):
    """Computation failed (exit code 3)."""


def _base_seed(doc: dict, flag_seed) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
        if seed < 0:
            raise ConfigError(f"{SEED_ENV} must be nonnegative")
        return seed
    return int(doc.get("base_seed", 0))


def _output_dir(doc: dict) -> Path:
    """Create ``output_dir`` when its parent exists; otherwise a configuration error."""
    out = Path(doc.get("output_dir", DEFAULT_OUTPUT_DIR))
    if out.is_dir():
        return out
    if out.exists():
        raise ConfigError(f"output_dir {out} exists and is not a directory")
    if not out.absolute().parent.is_dir():
        raise ConfigError(f"output_dir parent {out.absolute().parent} does not exist")
    out.mkdir()
    return out


def _write_text(path: Path, text: str) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(v):
    v = float(v)
    return v if np.isfinite(v) else None


# simulate ---------------------------------------------------------------------------


def cmd_simulate(doc: dict, args) -> int:
    sim = doc.get("simulate")
    if sim is None:
        raise ConfigError("simulate: section required")
    seed = _base_seed(doc, args.seed)
    setup = model_setup(doc)
    n, d = sim["n"], sim["d"]
    if "theta0" in sim:
        theta0 = np.asarray(sim["theta0"], dtype=float)
        if theta0.shape[0] != d:
            raise ConfigError(f"simulate.theta0: length {theta0.shape[0]} does not match d={d}")
    else:
        s = sim.get("s_star", min(2, d))
        if s > d:
            raise ConfigError(f"simulate.s_star: {s} exceeds d={d}")
        theta0 = sparse_truth(d, s)
    metrics = sim.get("metrics", ["sq_l2_error", "sq_prediction_error", "sigma_sq_error"])
    functionals = []
    for label in metrics:
        try:
            functionals.append(Functional.parse(label))
        except ValueError as exc:
            raise ConfigError(f"simulate.metrics: {exc}") from exc
    plan = {"command": "simulate", "n": n, "d": d, "s_star": int(np.count_nonzero(theta0)), "base_seed": seed}
    if args.dry_run:
        print(_json({**plan, "setup": setup.to_dict()}), end="")
        return EXIT_OK
    out = _output_dir(doc)
    try:
        data = generate_dataset(setup.design(d), n, theta0, sim.get("sigma0", 1.0), derive_seed(seed, 0, 0))
    except ModelError as exc:
        raise ConfigError(f"simulate: {exc}") from exc
    try:
        chain = setup.run_chain(data, derive_seed(seed, 0, 1))
    except (SamplerError, np.linalg.LinAlgError) as exc:
        raise RuntimeFailure(f"sampler failed: {exc}") from exc
    rows, summary_f = [], {}
    for f in functionals:
        est = posterior_functional(
            chain, f, data.truth, data.design, m=sim.get("functional_m", 10_000), seed=derive_seed(seed, 0, 2)
        )
        rows.append([f.label(), repr(float(est.mean)), repr(float(est.mcse))])
        summary_f[f.label()] = {"mean": _finite(est.mean), "mcse": _finite(est.mcse)}
    _write_text(out / "functionals.csv", _csv(["functional", "mean", "mcse"], rows))
    diag = chain_diagnostics(chain).to_dict() if len(chain) >= 100 else None
    summary = {
        **plan,
        "alpha": setup.alpha_for(n),
        "draws": len(chain),
        "accept_rate": None if chain.accept_rate is None else _finite(chain.accept_rate),
        "rejections": int(chain.rejections),
        "flags": list(chain.flags),
        "posterior_mean": {"theta": [float(v) for v in chain.theta.mean(axis=0)], "sigma": float(chain.sigma.mean())},
        "functionals": summary_f,
        "diagnostics": diag,
        "setup": setup.to_dict(),
    }
    _write_text(out / "summary.json", _json(summary))
    if sim.get("write_chain", False):
        chain.to_csv(out / "chain.csv")
    if sim.get("write_data", False):
        data.to_csv(out / "data.csv")
    print(f"simulate: {len(chain)} draws written to {out}")
    return EXIT_OK


# verify-lemmas -----------------------------------------------------------------------------


def _lemma_suite(doc: dict, seed: int) -> dict:
    suite = default_suite()
    for key, entries in doc.get("lemmas", {}).get("suite", {}).items():
        if key not in CHECKS:
            raise ConfigError(f"lemmas.suite: unknown lemma id {key!r}; known: {sorted(CHECKS)}")
        suite[key] = [dict(e) for e in entries]
    if seed:
        suite = {k: [{**e, "seed": e["seed"] ^ seed} if "seed" in e else e for e in v] for k, v in suite.items()}
    return suite


def cmd_verify_lemmas(doc: dict, args) -> int:
    seed = _base_seed(doc, args.seed)
    suite = _lemma_suite(doc, seed)
    only = None
    if args.only:
        only = [s.strip() for s in args.only.split(",") if s.strip()]
        unknown = sorted(set(only) - set(suite))
        if unknown:
            raise ConfigError(f"--only: unknown lemma ids {unknown}; known: {sorted(suite)}")
    if args.dry_run:
        for key in suite:
            if only is None or key in only:
                print(f"{key}: {len(suite[key])} check(s)")
        return EXIT_OK
    out = _output_dir(doc)
    try:
        results = run_lemma_suite(suite, only)
    except TypeError as exc:
        raise ConfigError(f"lemmas.suite: {exc}") from exc
    text = _csv(CSV_HEADER, [r.csv_row() for r in results])
    _write_text(out / "lemmas.csv", text)
    sys.stdout.write(text.replace("\r\n", "\n"))
    return EXIT_OK if suite_passed(results) else EXIT_ASSERTION


# studies -----------------------------------------------------------------------------------


def _cmd_study(doc: dict, args, kind: str) -> int:
    seed = _base_seed(doc, args.seed)
    cfg = study_config(doc, seed)
    if cfg is None or (kind == "misspec") != isinstance(cfg, MisspecStudyConfig):
        raise ConfigError(f"study.type: expected {kind!r} for this command")
    grid = cfg.grid()
    if args.dry_run:
        print(f"{kind} study: {len(grid)} cells x {cfg.replications} replications = {len(grid) * cfg.replications} chains")
        for n, d, s in grid:
            print(f"  n={n} d={d} s*={s}")
        return EXIT_OK
    out = _output_dir(doc)
    jobs = args.jobs or os.cpu_count() or 1
    try:
        report = run_misspec_study(cfg, jobs) if kind == "misspec" else run_rate_study(cfg, jobs)
    except ProjectionError as exc:
        raise RuntimeFailure(f"oracle projection failed: {exc}") from exc
    emit_report(report, out)
    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
    return EXIT_OK if report.passed else EXIT_ASSERTION


def cmd_rate_study(doc: dict, args) -> int:
    return _cmd_study(doc, args, "rate")


def cmd_misspec_study(doc: dict, args) -> int:
    return _cmd_study(doc, args, "misspec")


# calibrate ---------------------------------------------------------------------------------


def cmd_calibrate(args) -> int:
    from .calibration import calibrate_all, default_constants_path, write_constants

    target = Path(args.output) if args.output else default_constants_path()
    if not target.absolute().parent.is_dir():
        raise ConfigError(f"output parent {target.absolute().parent} does not exist")
    if args.dry_run:
        print(f"would fit all constants and write {target}")
        return EXIT_OK
    doc = calibrate_all(jobs=args.jobs or 1)
    write_constants(doc, target)
    print(f"constants written to {target}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-lemmas": cmd_verify_lemmas,
    "rate-study": cmd_rate_study,
    "misspec-study": cmd_misspec_study,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracbayes", description="Tempered and regular sparse-regression posteriors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON experiment configuration")
        p.add_argument("--seed", type=int, default=None, help=f"override base_seed (also {SEED_ENV})")
        p.add_argument("--dry-run", action="store_true", help="resolve the configuration and stop")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: logical cores)")
        if name == "verify-lemmas":
            p.add_argument("--only", default=None, help="comma-separated lemma ids, e.g. A.7")
    p = sub.add_parser("calibrate", help="refit the universal constants")
    p.add_argument("--output", default=None, help="constants file (default: the packaged constants.json)")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "calibrate":
            return cmd_calibrate(args)
        doc = load_config(args.config)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        return COMMANDS[args.command](doc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeFailure, SamplerError, ArithmeticError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
