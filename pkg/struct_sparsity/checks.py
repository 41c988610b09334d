"""Property suites behind `struct-sparsity check`."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List
import math

import numpy as np

from .baselines import lasso_kkt_violation, lasso_path
from .blocks import line_connected_blocks
from .coding import (
	BlockInducedCoding,
	GraphCoding,
	GroupCoding,
	NonUniformSingletonCoding,
	StandardCoding,
	TreeCoding,
	check_subadditive,
	heap_binary_tree,
	kraft_sum,
	leaf_binary_tree,
)
from .restricted_eigen import (
	check_structured_rip,
	exhaustive_constrained_solver,
	restricted_eigs,
	rip_sample_bound,
)
from .linalg import projection_gain, correlation_gain, restricted_least_squares, support_of
from .logger import get_logger
from .signals import gen_design_gaussian, gen_design_rip, recovery_error
from .structomp import GreedyConfig, last_within_budget, struct_omp
from .utils import derive_seed, make_rng
from .wavelet import haar2_forward, haar2_inverse, wavelet_tree


logger = get_logger()

KRAFT_TOL = 1e-9


@dataclass
class CheckResult:
	name: str
	passed: bool
	detail: str = ""
	rows: List[Dict[str, Any]] = field(default_factory=list)  # per-trial report, if any


def _kraft_schemes(p: int = 10):
	return {
		"standard": StandardCoding(p),
		"nonuniform": NonUniformSingletonCoding([float(min(j + 1, p - 1)) for j in range(p)]),
		"group": GroupCoding.equal(p, 2),
		"block-exact": BlockInducedCoding(line_connected_blocks(p, 3), "exact"),
		"tree-leaf": TreeCoding(leaf_binary_tree(3), p=8),
		"tree-heap": TreeCoding(heap_binary_tree(2)),
		"tree-wavelet": TreeCoding(wavelet_tree(2, 4).as_parent_array()),
		"graph-path": GraphCoding.line(p),
		"graph-grid": GraphCoding.grid(3, 3),
	}


def kraft_suite(seed: int = 0) -> List[CheckResult]:
	out = []
	for name, scheme in _kraft_schemes().items():
		total = kraft_sum(scheme)
		out.append(CheckResult(f"kraft/{name}", total <= 1.0 + KRAFT_TOL, f"sum={total:.6f}"))
	return out


def subadditive_suite(seed: int = 0) -> List[CheckResult]:
	schemes = {
		"standard": StandardCoding(10),
		"block-exact": BlockInducedCoding(line_connected_blocks(10, 3), "exact"),
		"graph-path": GraphCoding.line(10),
		"graph-grid": GraphCoding.grid(3, 3),
	}
	out = []
	for name, scheme in schemes.items():
		res = check_subadditive(scheme)
		detail = "ok" if res else f"counterexample {res.counterexample}"
		out.append(CheckResult(f"subadditive/{name}", bool(res), detail))
	return out


def rip_suite(seed: int = 0, trials: int = 200) -> List[CheckResult]:
	p, group_size, delta = 12, 3, 0.5
	scheme = GroupCoding.equal(p, group_size)
	s = scheme.complexity(range(group_size))
	n = int(math.ceil(rip_sample_bound(delta, math.log(20.0), s)))
	res = check_structured_rip(n, p, scheme, s, delta, trials, seed)
	return [
		CheckResult(
			"rip/success",
			res.success_fraction >= 0.95,
			f"n={n} fraction={res.success_fraction:.3f}",
			[dict(r.__dict__) for r in res.rows],
		),
		CheckResult("rip/structured-vs-cardinality", res.dominates_cardinality, f"k={res.max_feasible_size}"),
	]


def _interval_signal(rng: np.random.Generator, p: int, max_blocks: int, max_len: int) -> np.ndarray:
	"""Union of up to `max_blocks` separated intervals with +-1 entries."""
	beta = np.zeros(p)
	taken = np.zeros(p, dtype=bool)
	for _ in range(int(rng.integers(1, max_blocks + 1))):
		for _ in range(100):
			length = int(rng.integers(1, max_len + 1))
			start = int(rng.integers(0, p - length + 1))
			lo, hi = max(start - 1, 0), min(start + length + 1, p)
			if not taken[lo:hi].any():
				taken[start : start + length] = True
				beta[start : start + length] = rng.choice([-1.0, 1.0], size=length)
				break
	return beta


def oracle_suite(seed: int = 0, seeds: int = 100) -> List[CheckResult]:
	p, n = 12, 10
	blocks = line_connected_blocks(p, 3)
	scheme = GraphCoding.line(p)
	dominated = matched = 0
	for t in range(seeds):
		rng = make_rng(seed, "oracle", t)
		beta = _interval_signal(rng, p, 1, 3)
		X = gen_design_gaussian(n, p, derive_seed(seed, "oracle-design", t))
		y = X @ beta
		s = 4.0 * scheme.complexity(support_of(beta))
		path = struct_omp(X, y, blocks, scheme, GreedyConfig(budget=s))
		greedy = last_within_budget(path)
		oracle = exhaustive_constrained_solver(X, y, scheme, s)
		r_oracle = float(np.linalg.norm(X @ oracle - y))
		if r_oracle <= greedy.residual_norm + 1e-9 * max(1.0, float(np.linalg.norm(y))):
			dominated += 1
		if np.array_equal(support_of(greedy.coef, 1e-6), support_of(oracle, 1e-6)):
			matched += 1
	return [
		CheckResult("oracle/dominance", dominated == seeds, f"{dominated}/{seeds}"),
		CheckResult("oracle/support-match", matched >= 0.9 * seeds, f"{matched}/{seeds}"),
	]


def recovery_suite(seed: int = 0, seeds: int = 100) -> List[CheckResult]:
	p = 64
	blocks = line_connected_blocks(p, 6)
	scheme = GraphCoding.line(p)
	exact = 0
	for t in range(seeds):
		rng = make_rng(seed, "recovery", t)
		beta = _interval_signal(rng, p, 2, 6)
		c = scheme.complexity(support_of(beta))
		n = int(math.ceil(4.0 * c))
		X = gen_design_gaussian(n, p, derive_seed(seed, "recovery-design", t))
		y = X @ beta
		final = struct_omp(X, y, blocks, scheme, GreedyConfig(budget=2.0 * c))[-1]
		if final.residual_norm <= 1e-6 and recovery_error(final.coef, beta) <= 1e-6:
			exact += 1
	return [CheckResult("recovery/exact", exact >= 0.95 * seeds, f"{exact}/{seeds}")]


def haar_suite(seed: int = 0) -> List[CheckResult]:
	rng = make_rng(seed, "haar")
	image = rng.standard_normal((32, 32))
	grid = haar2_forward(image)
	back = haar2_inverse(grid)
	err = float(np.max(np.abs(back - image)))
	energy = abs(float(np.linalg.norm(grid.coefficients)) - float(np.linalg.norm(image))) / float(np.linalg.norm(image))
	const = haar2_forward(np.full((8, 8), 3.0)).coefficients
	tree = wavelet_tree(4, 4, 2)
	return [
		CheckResult("haar/round-trip", err <= 1e-10, f"max error {err:.2e}"),
		CheckResult("haar/parseval", energy <= 1e-10, f"relative gap {energy:.2e}"),
		CheckResult("haar/constant", abs(const[0, 0] - 24.0) <= 1e-10 and np.count_nonzero(np.abs(const) > 1e-12) == 1),
		CheckResult("haar/tree", tree.roots().tolist() == [0] and all(tree.children(v).size == 4 for v in (1, 4, 5))),
	]


def kernels_suite(seed: int = 0, pairs: int = 1000) -> List[CheckResult]:
	rng = make_rng(seed, "kernels")
	worst_orth = 0.0
	ratio_ok = 0
	for t in range(pairs):
		n, p = 20, 12
		X = gen_design_rip(n, p, derive_seed(seed, "kernels", t))
		y = rng.standard_normal(n)
		F = np.sort(rng.choice(p, size=int(rng.integers(1, 6)), replace=False))
		beta = restricted_least_squares(X, y, F)
		r = X @ beta - y
		worst_orth = max(worst_orth, float(np.max(np.abs(X[:, F].T @ r))))
		B = np.sort(rng.choice(np.setdiff1d(np.arange(p), F), size=int(rng.integers(1, 4)), replace=False))
		phi = projection_gain(X, r, B)
		phi_t = correlation_gain(X, r, B)
		lo, hi = restricted_eigs(X, B)
		if phi == 0 or n * lo * phi * (1 - 1e-9) <= phi_t <= n * hi * phi * (1 + 1e-9):
			ratio_ok += 1
	X = gen_design_gaussian(40, 30, derive_seed(seed, "kernels-lasso"))
	y = make_rng(seed, "kernels-y").standard_normal(40)
	path = lasso_path(X, y)
	kkt = max(lasso_kkt_violation(X, y, pt.coef, pt.param) for pt in path if pt.converged)
	return [
		CheckResult("kernels/ls-orthogonality", worst_orth <= 1e-8, f"max |X_F^T r| {worst_orth:.2e}"),
		CheckResult("kernels/gain-ratio", ratio_ok == pairs, f"{ratio_ok}/{pairs}"),
		CheckResult("kernels/lasso-kkt", kkt <= 1e-6, f"max violation {kkt:.2e}"),
	]


SUITES: Dict[str, Callable[..., List[CheckResult]]] = {
	"kraft": kraft_suite,
	"subadditive": subadditive_suite,
	"rip": rip_suite,
	"oracle": oracle_suite,
	"haar": haar_suite,
	"kernels": kernels_suite,
	"recovery": recovery_suite,
}


def run_suite(name: str, seed: int = 0) -> List[CheckResult]:
	if name == "all":
		names = list(SUITES)
	elif name in SUITES:
		names = [name]
	else:
		raise ValueError(f"Unknown check suite {name!r}; expected one of {sorted(SUITES)} or 'all'")
	results = [r for suite in names for r in SUITES[suite](seed=seed)]
	for r in results:
		(logger.info if r.passed else logger.error)(f"{'PASS' if r.passed else 'FAIL'} {r.name} {r.detail}")
	return results
