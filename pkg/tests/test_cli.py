from pathlib import Path

import pytest

from struct_sparsity.cli import main, parse_args
from struct_sparsity.export import read_manifest, read_matrix_csv, read_rows_csv, read_schema


QUICK = str(Path(__file__).resolve().parents[1] / "experiments" / "quick.yaml")
TINY = """\
name: tiny
master_seed: 7
trials: 1
signal: {kind: strong-1d, p: 32, k: 4, g: 1}
design: {n_values: [16]}
methods:
  - {kind: structomp, blocks: {kind: line, max_size: 4}}
  - {kind: omp}
  - {kind: lasso, lambda_count: 8, lambda_ratio: 1.0e-2}
  - {kind: group-lasso, group_sizes: [4], lambda_count: 8, lambda_ratio: 1.0e-2}
"""


def _tiny(tmp_path: Path) -> str:
	path = tmp_path / "tiny.yaml"
	path.write_text(TINY, encoding="utf-8")
	return str(path)


def test_parse_args_defaults():
	args = parse_args(["run", "--config", QUICK])
	assert args.command == "run" and args.trials is None and not args.full
	assert parse_args(["check"]).suite == "all"


def test_gen_writes_trial_files(tmp_path: Path):
	assert main(["gen", "--config", QUICK, "--out", str(tmp_path), "--trial", "1"]) == 0
	X = read_matrix_csv(tmp_path / "design_n32.csv")
	assert X.shape == (32, 64)
	assert read_matrix_csv(tmp_path / "observations_n32.csv").shape == (32, 1)
	assert read_schema(tmp_path / "signal.csv") == "signal/v1"
	manifest = read_manifest(tmp_path / "manifest.json")
	assert manifest["trial"] == 1 and manifest["k"] == 8
	assert "n=32" in manifest["seeds"]


def test_run_is_reproducible(tmp_path: Path):
	config = _tiny(tmp_path)
	a, b = tmp_path / "a", tmp_path / "b"
	assert main(["run", "--config", config, "--out", str(a)]) == 0
	assert main(["run", "--config", config, "--out", str(b)]) == 0
	assert (a / "trials.csv").read_bytes() == (b / "trials.csv").read_bytes()
	rows = read_rows_csv(a / "trials.csv")
	assert len(rows) == 4
	assert "wall_time" not in rows[0]
	assert not (a / "sweep.csv").exists()
	assert not (a / "traces").exists()


def test_sweep_and_report(tmp_path: Path):
	res = tmp_path / "sweep"
	assert main(["sweep", "--config", _tiny(tmp_path), "--out", str(res), "--trials", "2", "--timings"]) == 0
	assert "wall_time" in read_rows_csv(res / "trials.csv")[0]
	sweep = read_rows_csv(res / "sweep.csv")
	assert {r["method"] for r in sweep} == {"structomp", "omp", "lasso", "group-lasso-gs4"}
	assert all(r["trials"] == "2" for r in sweep)
	out = res / "report.csv"
	assert main(["report", "--input", str(res / "trials.csv"), "--k", "4", "--out", str(out)]) == 0
	assert read_rows_csv(out)[0]["ratio"] == "4"


def test_dry_run_writes_nothing(tmp_path: Path):
	out = tmp_path / "dry"
	assert main(["run", "--config", QUICK, "--out", str(out), "--dry-run"]) == 0
	assert main(["gen", "--config", QUICK, "--out", str(out), "--dry-run"]) == 0
	assert not out.exists()


def test_invalid_config_exit_code(tmp_path: Path):
	bad = tmp_path / "bad.yaml"
	bad.write_text("signal: {kind: square}\nmethods: [{kind: omp}]\ndesign: {n_values: [4]}\n", encoding="utf-8")
	assert main(["run", "--config", str(bad)]) == 2


def test_check_command():
	assert main(["check", "--suite", "haar"]) == 0
	assert main(["--log-level", "warning", "check", "--suite", "kraft"]) == 0
	with pytest.raises(SystemExit):
		parse_args(["check", "--suite", "nope"])


def test_run_with_trace_writes_solver_paths(tmp_path: Path):
	out = tmp_path / "traced"
	assert main(["run", "--config", _tiny(tmp_path), "--out", str(out), "--trace"]) == 0
	traces = out / "traces"
	trace = traces / "trace_structomp_n16_t0.csv"
	assert read_schema(trace) == "structomp-trace/v1"
	rows = read_rows_csv(trace)
	assert rows[0]["k"] == "0" and rows[0]["block_id"] == ""
	assert [int(r["k"]) for r in rows] == list(range(len(rows)))
	for method in ("omp", "lasso", "group-lasso-gs4"):
		path = traces / f"path_{method}_n16_t0.csv"
		assert read_schema(path) == "baseline-path/v1"
		assert {"param", "nnz", "residual_norm", "converged", "recovery_error"} <= set(read_rows_csv(path)[0])
	assert len(read_rows_csv(traces / "path_lasso_n16_t0.csv")) == 8


def test_check_writes_reports(tmp_path: Path):
	assert main(["check", "--suite", "rip", "--out", str(tmp_path)]) == 0
	checks = read_rows_csv(tmp_path / "checks.csv")
	assert [r["name"] for r in checks] == ["rip/success", "rip/structured-vs-cardinality"]
	assert all(r["passed"] == "1" for r in checks)
	report = read_rows_csv(tmp_path / "rip_report.csv")
	assert read_schema(tmp_path / "rip_report.csv") == "rip-report/v1"
	assert len(report) == 200
	assert all(float(r["rho_minus"]) <= float(r["rho_plus"]) for r in report)
