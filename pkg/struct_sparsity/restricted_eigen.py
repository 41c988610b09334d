"""Restricted eigenvalues, sampled structured-RIP checks and exhaustive oracles.

Everything here enumerates supports, so it is meant for small p.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple
import math

import numpy as np
from scipy import linalg as sla

from .linalg import SupportLike, as_design, as_observation, as_support, restricted_least_squares
from .logger import get_logger
from .utils import derive_seed


logger = get_logger()

FEASIBLE_LIMIT = 14
ORACLE_LIMIT = 16
_FEASIBLE_TOL = 1e-9


class EmptyFeasibleFamilyError(ValueError):
	pass


@dataclass
class EigBounds:
	rho_minus: float
	rho_plus: float
	argmin: np.ndarray
	argmax: np.ndarray
	approximate: bool = False


def restricted_eigs(X: np.ndarray, F: SupportLike) -> Tuple[float, float]:
	"""(smallest, largest) eigenvalue of X_F^T X_F / n, clipped at zero."""
	X = as_design(X)
	idx = as_support(F, X.shape[1])
	if idx.size == 0:
		return 0.0, 0.0
	XF = X[:, idx]
	ev = sla.eigh(XF.T @ XF / X.shape[0], eigvals_only=True)
	return max(float(ev[0]), 0.0), max(float(ev[-1]), 0.0)


def _all_supports(p: int, limit: int):
	if p > limit:
		from .coding import EnumerationLimitError

		raise EnumerationLimitError(f"Support enumeration refused for p={p} > {limit}")
	for k in range(1, p + 1):
		for combo in combinations(range(p), k):
			yield np.asarray(combo, dtype=np.int64)


def feasible_supports(scheme, s: float, limit: int = FEASIBLE_LIMIT) -> List[np.ndarray]:
	"""Nonempty supports with c(F) <= s, by size then lexicographically."""
	return [F for F in _all_supports(scheme.p, limit) if scheme.complexity(F) <= s + _FEASIBLE_TOL]


def _bounds_over(X: np.ndarray, family: Sequence[np.ndarray], approximate: bool = False) -> EigBounds:
	lo, hi = math.inf, -math.inf
	arg_lo = arg_hi = family[0]
	for F in family:
		a, b = restricted_eigs(X, F)
		if a < lo:
			lo, arg_lo = a, F
		if b > hi:
			hi, arg_hi = b, F
	return EigBounds(lo, hi, arg_lo, arg_hi, approximate)


def _greedy_bounds(X: np.ndarray, scheme, s: float) -> EigBounds:
	"""Grow supports from every feasible singleton, adding the feature that moves
	the extreme eigenvalue furthest while c(F) <= s. Gives an upper bound on
	rho_minus and a lower bound on rho_plus.
	"""
	p = X.shape[1]
	lo, hi = math.inf, -math.inf
	arg_lo = arg_hi = np.zeros(0, dtype=np.int64)
	for side in ("min", "max"):
		for start in range(p):
			F = np.array([start], dtype=np.int64)
			if scheme.complexity(F) > s + _FEASIBLE_TOL:
				continue
			while True:
				a, b = restricted_eigs(X, F)
				if side == "min" and a < lo:
					lo, arg_lo = a, F
				if side == "max" and b > hi:
					hi, arg_hi = b, F
				best, best_val = None, None
				for j in np.setdiff1d(np.arange(p), F):
					G = np.sort(np.append(F, j))
					if scheme.complexity(G) > s + _FEASIBLE_TOL:
						continue
					a, b = restricted_eigs(X, G)
					val = a if side == "min" else -b
					if best_val is None or val < best_val:
						best, best_val = G, val
				if best is None:
					break
				F = best
	if not math.isfinite(lo):
		raise EmptyFeasibleFamilyError(f"No nonempty support has complexity <= {s}")
	return EigBounds(lo, hi, arg_lo, arg_hi, approximate=True)


def rho_of_complexity(
	X: np.ndarray,
	scheme,
	s: float,
	limit: int = FEASIBLE_LIMIT,
	approximate: bool = False,
) -> EigBounds:
	"""rho_-(s) and rho_+(s) over every support with c(F) <= s.

	Exact by enumeration when p <= limit; otherwise only with approximate=True.
	"""
	X = as_design(X)
	if X.shape[1] > limit:
		if not approximate:
			from .coding import EnumerationLimitError

			raise EnumerationLimitError(f"Exact rho(s) needs p <= {limit}, got {X.shape[1]}")
		return _greedy_bounds(X, scheme, s)
	family = feasible_supports(scheme, s, limit)
	if not family:
		raise EmptyFeasibleFamilyError(f"No nonempty support has complexity <= {s}")
	return _bounds_over(X, family)


def rho_of_cardinality(X: np.ndarray, k: int, limit: int = FEASIBLE_LIMIT) -> EigBounds:
	"""Classic k-sparse bounds: extremes over every support of size exactly k."""
	X = as_design(X)
	p = X.shape[1]
	if p > limit:
		from .coding import EnumerationLimitError

		raise EnumerationLimitError(f"Exact rho(k) needs p <= {limit}, got {p}")
	if not 1 <= k <= p:
		raise EmptyFeasibleFamilyError(f"No support of size {k} in p={p}")
	family = [np.asarray(c, dtype=np.int64) for c in combinations(range(p), k)]
	return _bounds_over(X, family)


# ---------------------------------------------------------------------------
# sampled RIP

def rip_sample_bound(delta: float, t: float, s: float) -> float:
	"""Sample size (8 / delta^2) (ln 3 + t + s ln(1 + 8 / delta)) after which the
	structured RIP holds on complexity <= s with probability 1 - e^-t."""
	if not 0 < delta < 1:
		raise ValueError(f"delta must lie in (0, 1), got {delta}")
	return 8.0 / delta**2 * (math.log(3.0) + t + s * math.log(1.0 + 8.0 / delta))


@dataclass
class RipTrial:
	trial: int
	seed: int
	rho_minus: float
	rho_plus: float
	passed: bool
	rho_minus_cardinality: Optional[float] = None


@dataclass
class RipCheckResult:
	n: int
	p: int
	s: float
	delta: float
	success_fraction: float
	rows: List[RipTrial] = field(default_factory=list)
	max_feasible_size: int = 0

	@property
	def dominates_cardinality(self) -> bool:
		"""rho_-(s) >= rho_-(k) on every trial, k the largest feasible size."""
		return all(
			r.rho_minus_cardinality is None or r.rho_minus >= r.rho_minus_cardinality - 1e-12 for r in self.rows
		)


def check_structured_rip(
	n: int,
	p: int,
	scheme,
	s: float,
	delta: float,
	trials: int,
	seed: int,
	threads: int = 1,
	compare_cardinality: bool = True,
) -> RipCheckResult:
	"""Fraction of iid Gaussian designs with (1-delta)^2 <= rho_-(s) and rho_+(s) <= (1+delta)^2."""
	from .signals import gen_design_rip

	family = feasible_supports(scheme, s)
	if not family:
		raise EmptyFeasibleFamilyError(f"No nonempty support has complexity <= {s}")
	k_max = max(F.size for F in family)
	lo_ok, hi_ok = (1.0 - delta) ** 2, (1.0 + delta) ** 2

	def one(t: int) -> RipTrial:
		trial_seed = derive_seed(seed, "rip", t)
		X = gen_design_rip(n, p, trial_seed)
		b = _bounds_over(X, family)
		card = rho_of_cardinality(X, k_max).rho_minus if compare_cardinality else None
		return RipTrial(t, trial_seed, b.rho_minus, b.rho_plus, lo_ok <= b.rho_minus and b.rho_plus <= hi_ok, card)

	if threads > 1:
		with ThreadPoolExecutor(max_workers=threads) as ex:
			rows = list(ex.map(one, range(trials)))
	else:
		rows = [one(t) for t in range(trials)]
	frac = sum(r.passed for r in rows) / max(trials, 1)
	logger.info(f"Structured RIP n={n} p={p} s={s:.2f} delta={delta}: {frac:.3f} of {trials} trials pass")
	return RipCheckResult(n, p, s, delta, frac, rows, k_max)


# ---------------------------------------------------------------------------
# exhaustive oracles

def exhaustive_constrained_solver(
	X: np.ndarray,
	y: np.ndarray,
	scheme,
	s: float,
	limit: int = ORACLE_LIMIT,
) -> np.ndarray:
	"""argmin ||X beta - y|| subject to c(beta) <= s by enumerating supports.

	Ties go to the smaller support (first in size-then-lexicographic order).
	Returns zeros when no nonempty support is feasible.
	"""
	X = as_design(X)
	y = as_observation(X, y)
	best = np.zeros(X.shape[1])
	best_r2 = float(y @ y)
	tol = 1e-10 * max(best_r2, np.finfo(float).tiny)
	for F in _all_supports(X.shape[1], limit):
		if scheme.complexity(F) > s + _FEASIBLE_TOL:
			continue
		beta = restricted_least_squares(X, y, F)
		r = X @ beta - y
		r2 = float(r @ r)
		if r2 < best_r2 - tol:
			best, best_r2 = beta, r2
	return best


def exhaustive_penalized_solver(
	X: np.ndarray,
	y: np.ndarray,
	scheme,
	lam: float,
	limit: int = ORACLE_LIMIT,
) -> np.ndarray:
	"""argmin ||X beta - y||^2 + lam * c(beta) by enumerating supports."""
	X = as_design(X)
	y = as_observation(X, y)
	best = np.zeros(X.shape[1])
	best_obj = float(y @ y)
	for F in _all_supports(X.shape[1], limit):
		cF = scheme.complexity(F)
		if not math.isfinite(cF) or lam * cF >= best_obj:
			continue
		beta = restricted_least_squares(X, y, F)
		r = X @ beta - y
		obj = float(r @ r) + lam * cF
		if obj < best_obj - 1e-12 * max(best_obj, 1.0):
			best, best_obj = beta, obj
	return best


def approximation_ratio_bound(X: np.ndarray, blocks) -> float:
	"""min over finite blocks of rho_-(B) / rho_+(B).

	Selecting by the correlation surrogate instead of the projected gain is a
	gamma-approximation with at least this gamma.
	"""
	gamma = math.inf
	for i in blocks.finite_ids():
		lo, hi = restricted_eigs(X, blocks.indices(i))
		gamma = min(gamma, lo / hi if hi > 0 else 0.0)
	return 0.0 if not math.isfinite(gamma) else gamma
