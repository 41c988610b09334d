"""Standard-sparsity and group-sparsity baselines: OMP, Lasso and group Lasso.

Lasso minimises (1/2n)||y - X b||^2 + lam ||b||_1 and group Lasso
(1/2n)||y - X b||^2 + lam sum_g sqrt(|g|) ||b_g||_2, both by (block) coordinate
descent on the Gram matrix with warm starts along a decreasing lambda grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence
import math

import numpy as np
from scipy import linalg as sla
from scipy.optimize import brentq

from .linalg import DimensionError, as_design, as_observation, restricted_least_squares
from .logger import get_logger
from .signals import recovery_error


logger = get_logger()

DEFAULT_GRID_SIZE = 100
DEFAULT_GRID_RATIO = 1e-4
MAX_SWEEPS = 10000
CD_TOL = 1e-10
GROUP_KKT_TOL = 1e-8
KKT_TOL = 1e-6
SELECTION_CRITERIA = ("min-true-error", "target-sparsity", "min-residual-at-sparsity", "last")


@dataclass
class PathPoint:
	param: float  # lambda, or step k for OMP
	coef: np.ndarray
	residual_norm: float
	converged: bool = True

	@property
	def nnz(self) -> int:
		return int(np.count_nonzero(self.coef))


def _point(X: np.ndarray, y: np.ndarray, param: float, beta: np.ndarray, converged: bool = True) -> PathPoint:
	return PathPoint(float(param), beta.copy(), float(np.linalg.norm(X @ beta - y)), converged)


# ---------------------------------------------------------------------------
# OMP

def omp(X: np.ndarray, y: np.ndarray, k_max: int) -> List[PathPoint]:
	"""Orthogonal matching pursuit path for k = 0 .. k_max (stops early on an exact fit)."""
	X = as_design(X)
	y = as_observation(X, y)
	n, p = X.shape
	if not 1 <= k_max <= min(n, p):
		raise DimensionError(f"k_max must lie in [1, {min(n, p)}], got {k_max}")
	beta = np.zeros(p)
	path = [_point(X, y, 0, beta)]
	selected: List[int] = []
	free = np.ones(p, dtype=bool)
	y_norm = float(np.linalg.norm(y))
	for k in range(1, k_max + 1):
		r = y - X @ beta
		if np.linalg.norm(r) <= 1e-12 * y_norm:
			break
		score = np.abs(X.T @ r)
		score[~free] = -np.inf
		j = int(np.argmax(score))
		selected.append(j)
		free[j] = False
		beta = restricted_least_squares(X, y, selected)
		path.append(_point(X, y, k, beta))
	return path


# ---------------------------------------------------------------------------
# lambda grids

def _geometric(lam_max: float, num: int, ratio: float) -> np.ndarray:
	if lam_max <= 0:
		raise ValueError("lambda_max is zero; y is orthogonal to every column")
	return lam_max * np.geomspace(1.0, ratio, num)


def lambda_grid(X: np.ndarray, y: np.ndarray, num: int = DEFAULT_GRID_SIZE, ratio: float = DEFAULT_GRID_RATIO) -> np.ndarray:
	"""Geometric grid from max_j |x_j^T y| / n (the null-model threshold) down to ratio times that."""
	X = as_design(X)
	y = as_observation(X, y)
	return _geometric(float(np.max(np.abs(X.T @ y))) / X.shape[0], num, ratio)


def group_lambda_grid(
	X: np.ndarray,
	y: np.ndarray,
	groups: Sequence[Sequence[int]],
	num: int = DEFAULT_GRID_SIZE,
	ratio: float = DEFAULT_GRID_RATIO,
) -> np.ndarray:
	X = as_design(X)
	y = as_observation(X, y)
	c = X.T @ y
	lam_max = max(float(np.linalg.norm(c[np.asarray(g)])) / math.sqrt(len(g)) for g in groups) / X.shape[0]
	return _geometric(lam_max, num, ratio)


def _check_grid(lambdas) -> np.ndarray:
	lam = np.asarray(lambdas, dtype=np.float64).ravel()
	if lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
		raise ValueError("lambda grid must be positive and strictly decreasing")
	return lam


# ---------------------------------------------------------------------------
# Lasso

class _LassoCD:
	def __init__(self, X: np.ndarray, y: np.ndarray):
		self.n = X.shape[0]
		self.G = X.T @ X
		self.diag = np.diag(self.G).copy()
		self.c = X.T @ y  # X^T (y - X beta)
		self.beta = np.zeros(X.shape[1])

	def sweep(self, indices, thr: float) -> float:
		G, c, beta, diag = self.G, self.c, self.beta, self.diag
		worst = 0.0
		for j in indices:
			d = diag[j]
			if d <= 0:
				continue
			z = c[j] + d * beta[j]
			new = math.copysign(max(abs(z) - thr, 0.0), z) / d
			delta = new - beta[j]
			if delta != 0.0:
				c -= G[:, j] * delta
				beta[j] = new
				worst = max(worst, abs(delta) * math.sqrt(d))
		return worst

	def solve(self, lam: float, tol: float, max_sweeps: int) -> bool:
		thr = self.n * lam
		everything = range(self.beta.size)
		sweeps = 0
		while sweeps < max_sweeps:
			sweeps += 1
			if self.sweep(everything, thr) <= tol:
				return True
			active = np.flatnonzero(self.beta)
			while sweeps < max_sweeps:
				sweeps += 1
				if self.sweep(active, thr) <= tol:
					break
		return False


def lasso_path(
	X: np.ndarray,
	y: np.ndarray,
	lambdas=None,
	max_sweeps: int = MAX_SWEEPS,
	tol: float = CD_TOL,
) -> List[PathPoint]:
	"""Warm-started coordinate descent along a decreasing grid (default: lambda_grid)."""
	X = as_design(X)
	y = as_observation(X, y)
	lam = _check_grid(lambda_grid(X, y) if lambdas is None else lambdas)
	solver = _LassoCD(X, y)
	path = []
	for value in lam:
		converged = solver.solve(float(value), tol * X.shape[0] * float(value), max_sweeps)
		if not converged:
			logger.warning(f"Lasso did not converge at lambda={value:.4g} within {max_sweeps} sweeps")
		path.append(_point(X, y, value, solver.beta, converged))
	return path


def lasso_kkt_violation(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
	"""Largest KKT violation relative to n * lam."""
	X = as_design(X)
	y = as_observation(X, y)
	n = X.shape[0]
	c = X.T @ (y - X @ beta)
	thr = n * lam
	active = beta != 0
	viol_zero = np.maximum(np.abs(c[~active]) - thr, 0.0)
	viol_active = np.abs(c[active] - thr * np.sign(beta[active]))
	worst = max(viol_zero.max(initial=0.0), viol_active.max(initial=0.0))
	return float(worst / thr)


# ---------------------------------------------------------------------------
# group Lasso

def _check_groups(groups: Sequence[Sequence[int]], p: int) -> List[np.ndarray]:
	arrays = [np.asarray(sorted(int(j) for j in g), dtype=np.int64) for g in groups]
	if any(a.size == 0 for a in arrays):
		raise DimensionError("Groups must be nonempty")
	flat = np.concatenate(arrays)
	if flat.size != p or not np.array_equal(np.sort(flat), np.arange(p)):
		raise DimensionError(f"Groups must partition [0, {p})")
	return arrays


def _group_step(evals: np.ndarray, evecs: np.ndarray, c: np.ndarray, alpha: float) -> np.ndarray:
	"""argmin_b 1/2 b^T A b - c^T b + alpha ||b|| for A = V diag(e) V^T, assuming ||c|| > alpha."""
	w = evecs.T @ c
	keep = evals > 1e-12 * max(float(evals.max()), np.finfo(float).tiny)
	e, w = evals[keep], w[keep]
	if e.size == 0:
		return np.zeros_like(c)

	def excess(mu: float) -> float:
		return float(np.linalg.norm(w * mu / (e + mu))) - alpha

	w_norm = float(np.linalg.norm(w))
	if w_norm <= alpha:
		return np.zeros_like(c)
	hi = 2.0 * alpha * float(e.max()) / (w_norm - alpha) + np.finfo(float).tiny
	while excess(hi) <= 0:
		hi *= 2.0
	mu = brentq(excess, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
	return evecs[:, keep] @ (w / (e + mu))


def _group_violation(cg: np.ndarray, bg: np.ndarray, alpha: float) -> float:
	"""Group KKT residual relative to alpha; cg is X_g^T (y - X b)."""
	norm = float(np.linalg.norm(bg))
	if norm == 0:
		return max(float(np.linalg.norm(cg)) - alpha, 0.0) / alpha
	return float(np.linalg.norm(cg - alpha * bg / norm)) / alpha


class _GroupCD:
	def __init__(self, X: np.ndarray, y: np.ndarray, groups: List[np.ndarray]):
		self.n = X.shape[0]
		G = X.T @ X
		self.c = X.T @ y
		self.beta = np.zeros(X.shape[1])
		self.groups = groups
		self.weights = np.array([math.sqrt(g.size) for g in groups])
		self.blocks = [G[np.ix_(g, g)] for g in groups]
		self.columns = [G[:, g] for g in groups]
		self.eig = [sla.eigh(b) for b in self.blocks]

	def sweep(self, group_ids, lam: float) -> None:
		for gi in group_ids:
			g = self.groups[gi]
			old = self.beta[g]
			cg = self.c[g] + self.blocks[gi] @ old
			alpha = self.n * lam * self.weights[gi]
			if np.linalg.norm(cg) <= alpha:
				new = np.zeros(g.size)
			else:
				evals, evecs = self.eig[gi]
				new = _group_step(evals, evecs, cg, alpha)
			delta = new - old
			if np.any(delta != 0):
				self.c -= self.columns[gi] @ delta
				self.beta[g] = new

	def violation(self, group_ids, lam: float) -> float:
		worst = 0.0
		for gi in group_ids:
			g = self.groups[gi]
			alpha = self.n * lam * self.weights[gi]
			worst = max(worst, _group_violation(self.c[g], self.beta[g], alpha))
		return worst

	def solve(self, lam: float, tol: float, max_sweeps: int) -> bool:
		everything = range(len(self.groups))
		sweeps = 0
		while sweeps < max_sweeps:
			self.sweep(everything, lam)
			sweeps += 1
			if self.violation(everything, lam) <= tol:
				return True
			active = [gi for gi, g in enumerate(self.groups) if np.any(self.beta[g] != 0)]
			while sweeps < max_sweeps:
				self.sweep(active, lam)
				sweeps += 1
				if self.violation(active, lam) <= tol:
					break
		return False


def group_lasso(
	X: np.ndarray,
	y: np.ndarray,
	groups: Sequence[Sequence[int]],
	lambdas=None,
	max_sweeps: int = MAX_SWEEPS,
	tol: float = GROUP_KKT_TOL,
) -> List[PathPoint]:
	"""Block coordinate descent along a decreasing grid (default: group_lambda_grid).

	Each lambda stops once the group KKT violation relative to n * lam is at most
	`tol`, or after `max_sweeps` sweeps in total.
	"""
	X = as_design(X)
	y = as_observation(X, y)
	arrays = _check_groups(groups, X.shape[1])
	lam = _check_grid(group_lambda_grid(X, y, arrays) if lambdas is None else lambdas)
	solver = _GroupCD(X, y, arrays)
	path = []
	for value in lam:
		converged = solver.solve(float(value), tol, max_sweeps)
		if not converged:
			logger.warning(f"Group Lasso did not converge at lambda={value:.4g} within {max_sweeps} sweeps")
		path.append(_point(X, y, value, solver.beta, converged))
	return path


def group_kkt_violation(
	X: np.ndarray,
	y: np.ndarray,
	beta: np.ndarray,
	groups: Sequence[Sequence[int]],
	lam: float,
) -> float:
	"""Largest group-KKT violation relative to n * lam."""
	X = as_design(X)
	y = as_observation(X, y)
	n = X.shape[0]
	c = X.T @ (y - X @ beta)
	worst = 0.0
	for g in _check_groups(groups, X.shape[1]):
		worst = max(worst, _group_violation(c[g], beta[g], n * lam * math.sqrt(g.size)))
	return worst


# ---------------------------------------------------------------------------
# selection and export

def select_model(
	path: List[PathPoint],
	criterion: str,
	truth: Optional[np.ndarray] = None,
	sparsity: Optional[int] = None,
) -> PathPoint:
	if not path:
		raise ValueError("Cannot select from an empty path")
	if criterion == "min-true-error":
		if truth is None:
			raise ValueError("min-true-error needs the ground truth")
		errors = [recovery_error(pt.coef, truth) for pt in path]
		return path[int(np.argmin(errors))]
	if criterion == "target-sparsity":
		if sparsity is None:
			raise ValueError("target-sparsity needs a sparsity level")
		for pt in path:
			if pt.nnz >= sparsity:
				return pt
		return path[-1]
	if criterion == "min-residual-at-sparsity":
		if sparsity is None:
			raise ValueError("min-residual-at-sparsity needs a sparsity level")
		eligible = [pt for pt in path if pt.nnz <= sparsity] or [path[0]]
		return min(eligible, key=lambda pt: pt.residual_norm)
	if criterion == "last":
		return path[-1]
	raise ValueError(f"Unknown selection criterion {criterion!r}; expected one of {SELECTION_CRITERIA}")


def path_rows(path: List[PathPoint], truth: Optional[np.ndarray] = None) -> List[Dict[str, Any]]:
	rows = []
	for pt in path:
		row: Dict[str, Any] = {
			"param": pt.param,
			"nnz": pt.nnz,
			"residual_norm": pt.residual_norm,
			"converged": int(pt.converged),
		}
		if truth is not None:
			row["recovery_error"] = recovery_error(pt.coef, truth)
		rows.append(row)
	return rows
