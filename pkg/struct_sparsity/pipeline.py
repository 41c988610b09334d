from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
import json
import math
import time

import numpy as np
from tqdm import tqdm

from .baselines import PathPoint, group_lasso, group_lambda_grid, lambda_grid, lasso_path, omp, path_rows, select_model
from .blocks import blockset_from_descriptor, equal_groups
from .coding import CodingScheme, scheme_from_descriptor
from .config import ExperimentConfig, MethodSpec, NoiseConfig
from .export import read_rows_csv, write_path_csv, write_rows_csv, write_trace_csv
from .logger import get_logger
from .signals import SignalSample, add_noise, gen_design_gaussian, gen_design_rip, generate_signal, recovery_error
from .structomp import GreedyConfig, GreedyState, last_within_budget, struct_omp, trace_rows
from .utils import derive_seed
from .wavelet import WaveletGrid, haar2_inverse


logger = get_logger()

TRIAL_COLUMNS = ["method", "n", "trial", "seed", "status", "recovery_error", "residual_norm", "complexity"]
SWEEP_COLUMNS = ["method", "n", "ratio", "trials", "failed", "mean_error", "std_error", "mean_residual", "mean_complexity"]
# coordinate-descent tolerances for experiment runs (relative to n * lambda)
EXPERIMENT_CD_TOL = 1e-7
EXPERIMENT_GROUP_TOL = 1e-6
EXPERIMENT_MAX_SWEEPS = 1000


@dataclass
class TrialResult:
	method: str
	n: int
	trial: int
	seed: int
	status: str = "ok"
	recovery_error: float = math.nan
	residual_norm: float = math.nan
	complexity: float = math.nan
	wall_time: float = 0.0

	def as_row(self) -> Dict[str, Any]:
		return dict(self.__dict__)


@dataclass
class SweepRow:
	method: str
	n: int
	ratio: float
	trials: int
	failed: int
	mean_error: float
	std_error: float
	mean_residual: float
	mean_complexity: float


@dataclass
class TrialData:
	trial: int
	n: int
	seed: int
	sample: SignalSample
	X: np.ndarray
	y: np.ndarray


# ---------------------------------------------------------------------------
# seeds and data

def trial_seed(master: int, trial: int) -> int:
	return derive_seed(master, "trial", trial)


def trial_seeds(master: int, n: int, trial: int) -> Dict[str, int]:
	"""Method-independent streams: every method sees the same (X, y) for (n, trial)."""
	base = trial_seed(master, trial)
	return {
		"trial": base,
		"signal": derive_seed(base, "signal"),
		"design": derive_seed(base, "design", n),
		"noise": derive_seed(base, "noise", n),
	}


def trial_signal(cfg: ExperimentConfig, trial: int) -> SignalSample:
	seeds = trial_seeds(cfg.master_seed, 0, trial)
	return generate_signal(replace(cfg.signal, seed=seeds["signal"]), cfg.energy)


def prepare_trial(cfg: ExperimentConfig, n: int, trial: int, sample: Optional[SignalSample] = None) -> TrialData:
	seeds = trial_seeds(cfg.master_seed, n, trial)
	if sample is None:
		sample = trial_signal(cfg, trial)
	design = gen_design_gaussian if cfg.design.normalize_rows else gen_design_rip
	X = design(n, cfg.signal.p, seeds["design"])
	y = add_noise(X @ sample.coefficients, NoiseConfig(sigma=cfg.noise.sigma, seed=seeds["noise"]))
	return TrialData(trial, n, seeds["trial"], sample, X, y)


# ---------------------------------------------------------------------------
# schemes and block sets (cached per descriptor)

def _key(d: Dict[str, Any]) -> str:
	return json.dumps(d, sort_keys=True, default=str)


@lru_cache(maxsize=32)
def _cached_blocks(descriptor: str, geometry: str):
	return blockset_from_descriptor(json.loads(descriptor), json.loads(geometry)).validate()


@lru_cache(maxsize=32)
def _cached_scheme(descriptor: str, geometry: str) -> CodingScheme:
	return scheme_from_descriptor(json.loads(descriptor), json.loads(geometry))


def natural_scheme_descriptor(geometry: Dict[str, Any]) -> Dict[str, Any]:
	kind = geometry.get("kind")
	if kind in ("line", "grid"):
		return {"kind": "graph"}
	if kind == "wavelet":
		return {"kind": "tree"}
	raise ValueError(f"No natural coding scheme for geometry {kind!r}")


def natural_scheme(geometry: Dict[str, Any]) -> CodingScheme:
	"""Line graph coding for 1-D, grid graph coding for images, tree coding for wavelets."""
	return _cached_scheme(_key(natural_scheme_descriptor(geometry)), _key(geometry))


def reference_complexity(sample: SignalSample, scheme: CodingScheme) -> float:
	indicator = np.zeros(scheme.p)
	indicator[sample.reference_support] = 1.0
	return scheme.vector_complexity(indicator)


# ---------------------------------------------------------------------------
# methods

def _select(path: List[PathPoint], method: MethodSpec, sample: SignalSample) -> PathPoint:
	return select_model(path, method.selection, truth=sample.coefficients, sparsity=method.sparsity or sample.k)


def structomp_states(method: MethodSpec, data: TrialData) -> List[GreedyState]:
	geometry = data.sample.geometry
	blocks = _cached_blocks(_key(method.blocks), _key(geometry))
	scheme_desc = method.scheme or natural_scheme_descriptor(geometry)
	scheme = _cached_scheme(_key(scheme_desc), _key(geometry))
	budget = method.budget
	if budget is None:
		budget = method.budget_factor * reference_complexity(data.sample, scheme)
	cfg = GreedyConfig(
		budget=float(budget),
		gain_mode=method.gain_mode,
		gamma=method.gamma,
		max_iterations=method.max_iterations,
		tolerance=method.tolerance,
	)
	return struct_omp(data.X, data.y, blocks, scheme, cfg)


def baseline_path(method: MethodSpec, data: TrialData) -> List[PathPoint]:
	X, y = data.X, data.y
	if method.kind == "omp":
		k_max = min(method.k_max or X.shape[0], X.shape[0], X.shape[1])
		return omp(X, y, k_max)
	if method.kind == "lasso":
		lambdas = lambda_grid(X, y, method.lambda_count, method.lambda_ratio)
		return lasso_path(X, y, lambdas, EXPERIMENT_MAX_SWEEPS, EXPERIMENT_CD_TOL)
	if method.kind == "group-lasso":
		groups = equal_groups(X.shape[1], int(method.group_size))
		lambdas = group_lambda_grid(X, y, groups, method.lambda_count, method.lambda_ratio)
		return group_lasso(X, y, groups, lambdas, EXPERIMENT_MAX_SWEEPS, EXPERIMENT_GROUP_TOL)
	raise ValueError(f"Unknown method kind {method.kind!r}")


def run_method(method: MethodSpec, data: TrialData) -> np.ndarray:
	"""Estimated coefficient vector for one method on one trial."""
	if method.kind == "structomp":
		states = structomp_states(method, data)
		if method.selection == "last-within-budget":
			return last_within_budget(states).coef
		path = [PathPoint(s.complexity, s.coef, s.residual_norm) for s in states]
		return _select(path, method, data.sample).coef
	return _select(baseline_path(method, data), method, data.sample).coef


def write_method_traces(cfg: ExperimentConfig, out_dir: Path, trial: int = 0) -> List[Path]:
	"""Per-iteration StructOMP traces and baseline paths for one trial at every n."""
	written = []
	sample = None
	for n in cfg.n_values():
		data = prepare_trial(cfg, n, trial, sample)
		sample = data.sample
		for method in cfg.methods:
			stem = f"{method.id}_n{n}_t{trial}.csv"
			if method.kind == "structomp":
				written.append(write_trace_csv(out_dir / f"trace_{stem}", trace_rows(structomp_states(method, data))))
			else:
				written.append(write_path_csv(out_dir / f"path_{stem}", path_rows(baseline_path(method, data), sample.coefficients)))
	logger.info(f"Wrote {len(written)} trace files to {out_dir}")
	return written


def estimate_error(sample: SignalSample, estimate: np.ndarray) -> float:
	"""Relative error; in image space for wavelet-coded images."""
	geometry = sample.geometry
	if geometry.get("kind") == "wavelet" and sample.image is not None:
		h, w = geometry["h"], geometry["w"]
		recon = haar2_inverse(WaveletGrid(estimate.reshape(h, w), geometry["levels"]))
		return recovery_error(recon.ravel(), sample.image.ravel())
	return recovery_error(estimate, sample.coefficients)


def process_single_trial(cfg: ExperimentConfig, n: int, trial: int) -> List[TrialResult]:
	seeds = trial_seeds(cfg.master_seed, n, trial)
	try:
		data = prepare_trial(cfg, n, trial)
	except Exception as e:
		logger.exception(f"Trial {trial} (n={n}) could not be generated: {e}")
		return [TrialResult(m.id, n, trial, seeds["trial"], status="failed") for m in cfg.methods]

	scheme = natural_scheme(data.sample.geometry)
	results: List[TrialResult] = []
	for method in cfg.methods:
		start = time.perf_counter()
		try:
			est = run_method(method, data)
			results.append(
				TrialResult(
					method=method.id,
					n=n,
					trial=trial,
					seed=data.seed,
					recovery_error=estimate_error(data.sample, est),
					residual_norm=float(np.linalg.norm(data.X @ est - data.y)),
					complexity=scheme.vector_complexity(est),
					wall_time=time.perf_counter() - start,
				)
			)
		except Exception as e:
			logger.exception(f"{method.id} failed on trial {trial} (n={n}): {e}")
			results.append(
				TrialResult(method.id, n, trial, data.seed, status="failed", wall_time=time.perf_counter() - start)
			)
	return results


def plan(cfg: ExperimentConfig) -> List[Tuple[int, int]]:
	return [(n, t) for n in cfg.n_values() for t in range(cfg.trials)]


def _order(cfg: ExperimentConfig, results: List[TrialResult]) -> List[TrialResult]:
	rank = {m.id: i for i, m in enumerate(cfg.methods)}
	return sorted(results, key=lambda r: (rank[r.method], r.n, r.trial))


def run_experiment(cfg: ExperimentConfig, progress: bool = True) -> List[TrialResult]:
	"""Every (method, n, trial) result, ordered by (method, n, trial) regardless of completion order."""
	tasks = plan(cfg)
	logger.info(
		f"{cfg.name}: {len(cfg.methods)} methods x {len(cfg.n_values())} sample sizes x {cfg.trials} trials"
	)
	results: List[TrialResult] = []
	bar = tqdm(total=len(tasks), desc=cfg.name, disable=not progress)
	if cfg.threads > 1:
		with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
			futures = {ex.submit(process_single_trial, cfg, n, t): (n, t) for n, t in tasks}
			for fut in as_completed(futures):
				try:
					results.extend(fut.result())
				except Exception as e:
					logger.exception(f"Parallel task {futures[fut]} failed: {e}")
				bar.update(1)
	else:
		for n, t in tasks:
			results.extend(process_single_trial(cfg, n, t))
			bar.update(1)
	bar.close()
	results = _order(cfg, results)
	failed = sum(r.status != "ok" for r in results)
	if failed:
		logger.warning(f"{failed} of {len(results)} method runs failed")
	return results


# ---------------------------------------------------------------------------
# aggregation and files

def aggregate(results: List[TrialResult], nominal_k: int) -> List[SweepRow]:
	"""Mean and sample standard deviation (0 for a single trial) per (method, n)."""
	groups: Dict[Tuple[str, int], List[TrialResult]] = {}
	for r in results:
		groups.setdefault((r.method, r.n), []).append(r)
	rows = []
	for (method, n), items in groups.items():
		ok = [r for r in items if r.status == "ok"]
		errors = np.array([r.recovery_error for r in ok])
		mean = float(errors.mean()) if ok else math.nan
		std = float(errors.std(ddof=1)) if len(ok) > 1 else (0.0 if ok else math.nan)
		rows.append(
			SweepRow(
				method=method,
				n=n,
				ratio=n / nominal_k if nominal_k else math.nan,
				trials=len(items),
				failed=len(items) - len(ok),
				mean_error=mean,
				std_error=std,
				mean_residual=float(np.mean([r.residual_norm for r in ok])) if ok else math.nan,
				mean_complexity=float(np.mean([r.complexity for r in ok])) if ok else math.nan,
			)
		)
	return rows


def write_trials_csv(path: Path, results: List[TrialResult], timings: bool = False) -> Path:
	columns = TRIAL_COLUMNS + (["wall_time"] if timings else [])
	return write_rows_csv(path, "trials", columns, (r.as_row() for r in results))


def read_trials_csv(path: Path) -> List[TrialResult]:
	out = []
	for row in read_rows_csv(path):
		out.append(
			TrialResult(
				method=row["method"],
				n=int(row["n"]),
				trial=int(row["trial"]),
				seed=int(row["seed"]),
				status=row["status"],
				recovery_error=float(row["recovery_error"] or "nan"),
				residual_norm=float(row["residual_norm"] or "nan"),
				complexity=float(row["complexity"] or "nan"),
				wall_time=float(row.get("wall_time") or 0.0),
			)
		)
	return out


def write_sweep_csv(path: Path, rows: List[SweepRow]) -> Path:
	return write_rows_csv(path, "sweep", SWEEP_COLUMNS, (dict(r.__dict__) for r in rows))


def build_manifest(cfg: ExperimentConfig, command: str, results: Optional[List[TrialResult]] = None) -> Dict[str, Any]:
	seeds = {
		f"n={n}/trial={t}": trial_seeds(cfg.master_seed, n, t) for n, t in plan(cfg)
	}
	manifest: Dict[str, Any] = {
		"command": command,
		"name": cfg.name,
		"config": str(cfg.config_path) if cfg.config_path else None,
		"master_seed": cfg.master_seed,
		"trials": cfg.trials,
		"n_values": cfg.n_values(),
		"methods": [m.id for m in cfg.methods],
		"seeds": seeds,
	}
	if results is not None:
		manifest["failed"] = sum(r.status != "ok" for r in results)
		manifest["wall_time"] = {
			m.id: float(sum(r.wall_time for r in results if r.method == m.id)) for m in cfg.methods
		}
	return manifest

