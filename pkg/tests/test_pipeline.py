import math
from pathlib import Path

import numpy as np
import pytest

from struct_sparsity import pipeline
from struct_sparsity.config import build_config, load_config
from struct_sparsity.pipeline import (
	TrialResult,
	aggregate,
	build_manifest,
	estimate_error,
	natural_scheme,
	prepare_trial,
	read_trials_csv,
	reference_complexity,
	run_experiment,
	run_method,
	structomp_states,
	trial_seeds,
	write_trials_csv,
)
from struct_sparsity.structomp import last_within_budget


def _cfg(**overrides):
	data = {
		"name": "tiny",
		"master_seed": 3,
		"trials": 2,
		"signal": {"kind": "strong-1d", "p": 64, "k": 8, "g": 2},
		"design": {"n_values": [24, 32]},
		"methods": [
			{"kind": "structomp", "blocks": {"kind": "line", "max_size": 4}},
			{"kind": "omp"},
			{"kind": "lasso", "lambda_count": 20},
			{"kind": "group-lasso", "group_sizes": [4], "lambda_count": 20},
		],
	}
	data.update(overrides)
	return build_config(data).validate()


def test_trial_seeds_share_signal_across_n():
	a = trial_seeds(0, 24, 1)
	b = trial_seeds(0, 32, 1)
	assert a["signal"] == b["signal"] and a["trial"] == b["trial"]
	assert a["design"] != b["design"] and a["noise"] != b["noise"]
	assert trial_seeds(0, 24, 2)["signal"] != a["signal"]


def test_prepare_trial_is_paired_and_deterministic():
	cfg = _cfg()
	d1 = prepare_trial(cfg, 24, 0)
	d2 = prepare_trial(cfg, 24, 0)
	np.testing.assert_array_equal(d1.X, d2.X)
	np.testing.assert_array_equal(d1.y, d2.y)
	other_n = prepare_trial(cfg, 32, 0, d1.sample)
	np.testing.assert_array_equal(other_n.sample.coefficients, d1.sample.coefficients)
	assert d1.X.shape == (24, 64)


def test_design_rows_follow_normalize_flag():
	cfg = _cfg()
	normalized = prepare_trial(cfg, 24, 0)
	np.testing.assert_allclose(np.linalg.norm(normalized.X, axis=1), 1.0)
	raw = prepare_trial(_cfg(design={"n_values": [24, 32], "normalize_rows": False}), 24, 0)
	assert np.max(np.abs(np.linalg.norm(raw.X, axis=1) - 1.0)) > 0.5
	np.testing.assert_allclose(raw.y, raw.X @ raw.sample.coefficients, atol=0.1)


def test_reference_complexity_of_strong_signal():
	cfg = _cfg()
	sample = prepare_trial(cfg, 24, 0).sample
	scheme = natural_scheme(sample.geometry)
	assert reference_complexity(sample, scheme) == pytest.approx(scheme.complexity(np.flatnonzero(sample.coefficients)))


def test_every_method_produces_an_estimate():
	cfg = _cfg()
	data = prepare_trial(cfg, 32, 0)
	for method in cfg.methods:
		est = run_method(method, data)
		assert est.shape == (64,)
		assert math.isfinite(estimate_error(data.sample, est))


def test_structomp_defaults_to_last_state_within_budget():
	cfg = _cfg()
	structomp = cfg.methods[0]
	assert structomp.selection == "last-within-budget"
	data = prepare_trial(cfg, 32, 0)
	states = structomp_states(structomp, data)
	np.testing.assert_array_equal(run_method(structomp, data), last_within_budget(states).coef)


def test_run_experiment_order_and_determinism():
	cfg = _cfg()
	first = run_experiment(cfg, progress=False)
	assert len(first) == 4 * 2 * 2
	assert [(r.method, r.n, r.trial) for r in first[:4]] == [
		("structomp", 24, 0),
		("structomp", 24, 1),
		("structomp", 32, 0),
		("structomp", 32, 1),
	]
	assert all(r.status == "ok" for r in first)
	threaded = run_experiment(_cfg(threads=4), progress=False)
	assert [r.recovery_error for r in threaded] == [r.recovery_error for r in first]


def test_trials_csv_is_byte_identical_across_runs(tmp_path: Path):
	a = write_trials_csv(tmp_path / "a.csv", run_experiment(_cfg(), progress=False))
	b = write_trials_csv(tmp_path / "b.csv", run_experiment(_cfg(), progress=False))
	assert a.read_bytes() == b.read_bytes()
	back = read_trials_csv(a)
	assert len(back) == 16 and back[0].method == "structomp"


def test_failed_method_is_recorded(monkeypatch):
	real = pipeline.run_method

	def flaky(method, data):
		if method.kind == "omp":
			raise RuntimeError("boom")
		return real(method, data)

	monkeypatch.setattr(pipeline, "run_method", flaky)
	results = run_experiment(_cfg(trials=1), progress=False)
	failed = [r for r in results if r.status == "failed"]
	assert {r.method for r in failed} == {"omp"}
	assert all(math.isnan(r.recovery_error) for r in failed)
	rows = {(r.method, r.n): r for r in aggregate(results, 8)}
	assert rows[("omp", 24)].failed == 1
	assert math.isnan(rows[("omp", 24)].mean_error)


def test_aggregate_single_trial_and_ratio():
	results = [TrialResult("lasso", 16, 0, 1, recovery_error=0.4, residual_norm=1.0, complexity=5.0)]
	row = aggregate(results, 8)[0]
	assert row.std_error == 0.0 and row.mean_error == pytest.approx(0.4)
	assert row.ratio == pytest.approx(2.0)
	two = aggregate(results + [TrialResult("lasso", 16, 1, 2, recovery_error=0.6)], 8)[0]
	assert two.std_error == pytest.approx(np.std([0.4, 0.6], ddof=1))


def test_manifest_lists_seeds():
	cfg = _cfg()
	manifest = build_manifest(cfg, "run")
	assert manifest["methods"] == ["structomp", "omp", "lasso", "group-lasso-gs4"]
	assert manifest["seeds"]["n=24/trial=1"] == trial_seeds(3, 24, 1)


def test_wavelet_errors_are_measured_in_image_space():
	cfg = build_config(
		{
			"signal": {"kind": "piecewise-2d", "h": 16, "w": 16, "seed": 1},
			"design": {"n_values": [64]},
			"methods": [{"kind": "structomp", "blocks": {"kind": "tree"}}],
			"trials": 1,
		}
	).validate()
	data = prepare_trial(cfg, 64, 0)
	assert estimate_error(data.sample, data.sample.coefficients) == pytest.approx(0.0, abs=1e-10)
	est = run_method(cfg.methods[0], data)
	assert math.isfinite(estimate_error(data.sample, est))


EXPERIMENTS = Path(__file__).resolve().parents[1] / "experiments"


def _preset(name: str, n_values, trials: int = 20):
	cfg = load_config(EXPERIMENTS / name, trials=trials)
	cfg.design.n_values = list(n_values)
	return cfg.validate()


def _means(cfg):
	return {r.method: r.mean_error for r in aggregate(run_experiment(cfg, progress=False), cfg.signal.nominal_k())}


@pytest.mark.slow
def test_strong_sparse_experiment_at_n_160():
	means = _means(_preset("strong_1d.yaml", [160]))
	assert means["structomp"] <= 0.15
	assert means["omp"] >= 0.5
	assert means["lasso"] >= 0.5
	assert means["structomp"] < means["group-lasso-gs8"]


@pytest.mark.slow
def test_weak_sparse_experiment_ordering_at_n_48():
	means = _means(_preset("weak_1d.yaml", [48]))
	assert means["structomp"] <= 0.3
	assert means["structomp"] < means["omp"] < means["lasso"]


@pytest.mark.slow
def test_tree_experiment_ordering():
	cfg = _preset("tree_2d.yaml", [256, 384, 512])
	rows = aggregate(run_experiment(cfg, progress=False), cfg.signal.nominal_k())
	for n in (256, 384, 512):
		at_n = {r.method: r.mean_error for r in rows if r.n == n}
		assert at_n["structomp"] < min(at_n["omp"], at_n["lasso"])
