import argparse
import sys
from pathlib import Path

from rich.console import Console
from rich.table import Table

from .checks import SUITES, run_suite
from .config import ConfigError, load_config
from .export import write_checks_csv, write_manifest, write_matrix_csv, write_pgm, write_rip_csv, write_vector_csv
from .logger import get_logger, set_level
from .pipeline import (
	aggregate,
	build_manifest,
	plan,
	prepare_trial,
	read_trials_csv,
	run_experiment,
	trial_seeds,
	write_sweep_csv,
	write_trials_csv,
	write_method_traces,
)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
	p.add_argument("--config", default=None, help="YAML/JSON experiment config")
	p.add_argument("--seed", type=int, default=None, help="Master seed override")
	p.add_argument("--trials", type=int, default=None, help="Trials per sample size")
	p.add_argument("--out", default=None, help="Output folder")
	p.add_argument("--threads", type=int, default=None, help="Parallel trials")
	p.add_argument("--full", action="store_true", help="Use the full 100-trial protocol")
	p.add_argument("--dry-run", action="store_true", help="Log the plan without running or writing")


def parse_args(argv=None):
	parser = argparse.ArgumentParser(description="Structured sparsity: StructOMP and baselines on synthetic recovery problems")
	parser.add_argument("--log-level", default="info", help="Log level: debug, info, warning, error")
	sub = parser.add_subparsers(dest="command", required=True)

	gen = sub.add_parser("gen", help="Write one trial's signal, designs and observations")
	_add_run_flags(gen)
	gen.add_argument("--trial", type=int, default=0, help="Trial index to materialise")

	run = sub.add_parser("run", help="Run every method on every (n, trial) and write trials.csv")
	_add_run_flags(run)
	run.add_argument("--timings", action="store_true", help="Add a wall_time column to trials.csv")
	run.add_argument("--trace", action="store_true", help="Also write per-iteration traces and solver paths for trial 0")

	sweep = sub.add_parser("sweep", help="Run and aggregate mean/std error per (method, n)")
	_add_run_flags(sweep)
	sweep.add_argument("--timings", action="store_true", help="Add a wall_time column to trials.csv")
	sweep.add_argument("--trace", action="store_true", help="Also write per-iteration traces and solver paths for trial 0")

	report = sub.add_parser("report", help="Aggregate an existing trials.csv")
	report.add_argument("--input", required=True, help="trials.csv written by run or sweep")
	report.add_argument("--k", type=int, default=None, help="Nominal k for the n/k column")
	report.add_argument("--out", default=None, help="Optional sweep CSV to write")

	check = sub.add_parser("check", help="Run a property suite")
	check.add_argument("--suite", default="all", choices=sorted(SUITES) + ["all"])
	check.add_argument("--seed", type=int, default=0)
	check.add_argument("--out", default=None, help="Folder for checks.csv and per-trial reports")
	return parser.parse_args(argv)


def _load(args):
	return load_config(
		Path(args.config) if args.config else None,
		seed=args.seed,
		trials=args.trials,
		output=Path(args.out) if args.out else None,
		threads=args.threads,
		full=args.full,
	)


def _print_sweep(rows) -> None:
	table = Table(title="Recovery error")
	for col in ("method", "n", "n/k", "mean", "std", "trials", "failed"):
		table.add_column(col)
	for r in sorted(rows, key=lambda r: (r.method, r.n)):
		table.add_row(
			r.method, str(r.n), f"{r.ratio:.2f}", f"{r.mean_error:.4f}", f"{r.std_error:.4f}", str(r.trials), str(r.failed)
		)
	Console().print(table)


def cmd_gen(args) -> int:
	logger = get_logger()
	cfg = _load(args)
	out = cfg.output
	if args.dry_run:
		logger.info(f"[DRY-RUN] Would write trial {args.trial} for n in {cfg.n_values()} to {out}")
		return 0
	sample = None
	files = []
	for n in cfg.n_values():
		data = prepare_trial(cfg, n, args.trial, sample)
		sample = data.sample
		files.append(write_matrix_csv(out / f"design_n{n}.csv", data.X, "design").name)
		files.append(write_vector_csv(out / f"observations_n{n}.csv", data.y, "observations").name)
	files.append(write_vector_csv(out / "signal.csv", sample.coefficients, "signal").name)
	if sample.image is not None:
		files.append(write_pgm(out / "image.pgm", sample.image).name)
	write_manifest(
		out / "manifest.json",
		{
			"command": "gen",
			"name": cfg.name,
			"master_seed": cfg.master_seed,
			"trial": args.trial,
			"signal": sample.spec.__dict__,
			"k": sample.k,
			"seeds": {f"n={n}": trial_seeds(cfg.master_seed, n, args.trial) for n in cfg.n_values()},
			"files": files,
		},
	)
	logger.info(f"Wrote {len(files)} files to {out}")
	return 0


def cmd_run(args, sweep: bool = False) -> int:
	logger = get_logger()
	cfg = _load(args)
	if args.dry_run:
		logger.info(
			f"[DRY-RUN] {len(plan(cfg))} trial tasks, methods {[m.id for m in cfg.methods]}, output {cfg.output}"
		)
		return 0
	results = run_experiment(cfg, progress=sys.stderr.isatty())
	write_trials_csv(cfg.output / "trials.csv", results, timings=args.timings)
	rows = aggregate(results, cfg.signal.nominal_k())
	if sweep:
		write_sweep_csv(cfg.output / "sweep.csv", rows)
	write_manifest(cfg.output / "manifest.json", build_manifest(cfg, "sweep" if sweep else "run", results))
	if args.trace:
		write_method_traces(cfg, cfg.output / "traces")
	_print_sweep(rows)
	logger.info(f"Results written to {cfg.output}")
	return 0


def cmd_sweep(args) -> int:
	return cmd_run(args, sweep=True)


def cmd_report(args) -> int:
	results = read_trials_csv(Path(args.input))
	rows = aggregate(results, args.k or 0)
	_print_sweep(rows)
	if args.out:
		write_sweep_csv(Path(args.out), rows)
	return 0


def cmd_check(args) -> int:
	results = run_suite(args.suite, seed=args.seed)
	failed = [r for r in results if not r.passed]
	get_logger().info(f"{len(results) - len(failed)}/{len(results)} checks passed")
	if args.out:
		out = Path(args.out)
		write_checks_csv(out / "checks.csv", ({"name": r.name, "passed": r.passed, "detail": r.detail} for r in results))
		for r in results:
			if r.rows:
				write_rip_csv(out / "rip_report.csv", r.rows)
	return 1 if failed else 0


def main(argv=None) -> int:
	args = parse_args(argv)
	logger = get_logger()
	set_level(args.log_level)
	try:
		if args.command == "gen":
			return cmd_gen(args)
		if args.command == "run":
			return cmd_run(args)
		if args.command == "sweep":
			return cmd_sweep(args)
		if args.command == "report":
			return cmd_report(args)
		return cmd_check(args)
	except ConfigError as e:
		logger.error(f"Invalid configuration: {e}")
		return 2


if __name__ == "__main__":
	sys.exit(main())
