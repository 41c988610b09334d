"""Structured orthogonal matching pursuit.

Each iteration adds the base block with the largest residual-energy reduction
per unit of coding-complexity increase, refits by least squares on the grown
support and stops once the complexity exceeds the budget.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List, Optional
import math

import numpy as np

from .blocks import Block, BlockSet
from .coding import BlockInducedCoding, CodingScheme
from .linalg import (
	DimensionError,
	as_design,
	as_observation,
	as_support,
	projection_gain,
	restricted_least_squares,
)
from .logger import get_logger


logger = get_logger()

GAIN_MODES = ("projection", "correlation")
EXACT_FIT_RTOL = 1e-12
_BUDGET_TOL = 1e-9
_FREE_TOL = 1e-12


class GreedyError(RuntimeError):
	pass


@dataclass
class GreedyConfig:
	budget: float
	gain_mode: str = "projection"
	# recorded for theory reports; selection is an exact argmax
	gamma: float = 1.0
	max_iterations: int = 1000
	tolerance: float = 0.0

	def validate(self) -> "GreedyConfig":
		if not self.budget > 0:
			raise GreedyError(f"Budget must be positive, got {self.budget}")
		if self.gain_mode not in GAIN_MODES:
			raise GreedyError(f"Unknown gain mode {self.gain_mode!r}; expected one of {GAIN_MODES}")
		if not 0 < self.gamma <= 1:
			raise GreedyError(f"gamma must lie in (0, 1], got {self.gamma}")
		if self.max_iterations < 1 or self.tolerance < 0:
			raise GreedyError("max_iterations must be >= 1 and tolerance >= 0")
		return self


@dataclass
class GreedyState:
	iteration: int
	support: np.ndarray
	coef: np.ndarray
	residual: np.ndarray  # X @ coef - y
	complexity: float
	block_id: Optional[int] = None
	gain: float = 0.0
	within_budget: bool = True
	free: bool = False
	stop_reason: Optional[str] = None

	@property
	def residual_norm(self) -> float:
		return float(np.linalg.norm(self.residual))


def _block_indices(block) -> np.ndarray:
	if isinstance(block, Block):
		return np.asarray(block.indices, dtype=np.int64)
	return np.asarray(block, dtype=np.int64).ravel()


def complexity_increment(scheme: CodingScheme, support, block) -> float:
	"""c(B u F) - c(F); for tracked block coding cl0(B) + 1 + |B - F|."""
	F = as_support(support, scheme.p)
	idx = _block_indices(block)
	novel = np.setdiff1d(idx, F)
	if novel.size == 0:
		return 0.0
	if isinstance(scheme, BlockInducedCoding) and scheme.tracked:
		if not isinstance(block, Block):
			raise GreedyError("Tracked block coding needs a Block with its base length")
		return block.base_length + 1.0 + novel.size
	return scheme.increment_oracle(F)(novel)


def _gain(X: np.ndarray, state: GreedyState, block, scheme: CodingScheme, numerator) -> float:
	novel = np.setdiff1d(_block_indices(block), state.support)
	if novel.size == 0:
		return 0.0
	inc = complexity_increment(scheme, state.support, block)
	if not math.isfinite(inc):
		return 0.0
	if inc <= _FREE_TOL:
		return math.inf
	return numerator(X, state.residual, novel) / inc


def gain_phi(X: np.ndarray, y: np.ndarray, state: GreedyState, block, scheme: CodingScheme) -> float:
	"""Projected residual energy on B - F per unit complexity increment.

	0 when B is already inside F; +inf for a free block (no complexity increase).
	"""
	return _gain(as_design(X), state, block, scheme, projection_gain)


def gain_phi_tilde(X: np.ndarray, y: np.ndarray, state: GreedyState, block, scheme: CodingScheme) -> float:
	"""Correlation surrogate ||X_{B-F}^T r||^2 per unit complexity increment."""

	def corr(X, r, novel):
		return float(np.sum((X[:, novel].T @ r) ** 2))

	return _gain(as_design(X), state, block, scheme, corr)


def initial_state(X: np.ndarray, y: np.ndarray) -> GreedyState:
	p = X.shape[1]
	return GreedyState(0, np.zeros(0, dtype=np.int64), np.zeros(p), -np.asarray(y, dtype=np.float64), 0.0)


class _Selector:
	def __init__(self, X: np.ndarray, blocks: BlockSet, scheme: CodingScheme, gain_mode: str):
		self.X = X
		self.blocks = blocks
		self.scheme = scheme
		self.gain_mode = gain_mode
		self.tracked = isinstance(scheme, BlockInducedCoding) and scheme.tracked
		self.candidates = blocks.finite_ids()
		self.col_norm2 = np.einsum("ij,ij->j", X, X)

	def increments(self, F: np.ndarray):
		if self.tracked:
			return None
		return self.scheme.increment_oracle(F)

	def select(self, F: np.ndarray, residual: np.ndarray):
		"""(block id, gain, increment, free) of the chosen block, or None."""
		in_F = np.zeros(self.X.shape[1], dtype=bool)
		in_F[F] = True
		oracle = self.increments(F)
		corr = self.X.T @ residual
		corr2 = corr * corr
		best = None
		best_gain = 0.0
		for i in self.candidates:
			idx = self.blocks.indices(i)
			novel = idx[~in_F[idx]]
			if novel.size == 0:
				continue
			if self.tracked:
				inc = self.blocks[i].base_length + 1.0 + novel.size
			else:
				inc = oracle(novel)
			if not math.isfinite(inc):
				continue
			if inc <= _FREE_TOL:
				return i, math.inf, inc, True
			if self.gain_mode == "correlation":
				num = float(corr2[novel].sum())
			elif novel.size == 1:
				j = int(novel[0])
				num = float(corr2[j] / self.col_norm2[j]) if self.col_norm2[j] > 0 else 0.0
			else:
				num = projection_gain(self.X, residual, novel)
			g = num / inc
			if g > best_gain:
				best, best_gain = (i, g, inc, False), g
		return best

	def cheapest(self) -> float:
		oracle = self.increments(np.zeros(0, dtype=np.int64))
		costs = []
		for i in self.candidates:
			b = self.blocks[i]
			costs.append(b.base_length + 1.0 + b.size if self.tracked else oracle(self.blocks.indices(i)))
		return min(costs) if costs else math.inf


def struct_omp(
	X: np.ndarray,
	y: np.ndarray,
	blocks: BlockSet,
	scheme: CodingScheme,
	cfg: GreedyConfig,
) -> List[GreedyState]:
	"""Run the structured greedy loop and return the full path, starting at the empty model.

	The last state may exceed the budget; `within_budget` flags every state
	with complexity <= budget and the last state carries `stop_reason`.
	"""
	X = as_design(X)
	y = as_observation(X, y)
	cfg.validate()
	p = X.shape[1]
	if blocks.p != p or scheme.p != p:
		raise DimensionError(f"Block set (p={blocks.p}) and scheme (p={scheme.p}) must match X (p={p})")

	selector = _Selector(X, blocks, scheme, cfg.gain_mode)
	if not selector.candidates:
		raise GreedyError("Block set has no block with a finite base length")

	state = initial_state(X, y)
	path = [state]
	y2 = float(y @ y)
	if y2 == 0.0:
		state.stop_reason = "zero_signal"
		return path
	cheapest = selector.cheapest()
	if cheapest > cfg.budget + _BUDGET_TOL:
		logger.warning(
			f"Budget {cfg.budget:.3f} is below the cheapest block complexity {cheapest:.3f}; returning the empty model"
		)
		state.stop_reason = "budget_too_small"
		return path

	F = state.support
	r2 = y2
	complexity = 0.0
	for k in range(1, cfg.max_iterations + 1):
		pick = selector.select(F, state.residual)
		if pick is None:
			state.stop_reason = "no_gain"
			break
		block_id, gain, inc, free = pick
		F = np.union1d(F, blocks.indices(block_id))
		coef = restricted_least_squares(X, y, F)
		residual = X @ coef - y
		complexity = complexity + inc if selector.tracked else scheme.complexity(F)
		prev_r2, r2 = r2, float(residual @ residual)
		state = GreedyState(
			iteration=k,
			support=F,
			coef=coef,
			residual=residual,
			complexity=float(complexity),
			block_id=int(block_id),
			gain=float(gain),
			within_budget=complexity <= cfg.budget + _BUDGET_TOL,
			free=free,
		)
		path.append(state)
		logger.debug(
			f"k={k} block={block_id} gain={gain:.4g} |F|={F.size} c={complexity:.3f} r={math.sqrt(r2):.4g}"
			+ (" (free)" if free else "")
		)
		if not state.within_budget:
			state.stop_reason = "budget"
			break
		if r2 <= (EXACT_FIT_RTOL**2) * y2:
			state.stop_reason = "exact_fit"
			break
		if not free and prev_r2 - r2 < cfg.tolerance:
			state.stop_reason = "stalled"
			break
	else:
		state.stop_reason = "max_iterations"
	return path


def last_within_budget(path: List[GreedyState]) -> GreedyState:
	for state in reversed(path):
		if state.within_budget:
			return state
	return path[0]


def trace_rows(path: List[GreedyState]) -> List[Dict[str, Any]]:
	return [
		{
			"k": s.iteration,
			"block_id": "" if s.block_id is None else s.block_id,
			"gain": s.gain,
			"residual_norm": s.residual_norm,
			"complexity": s.complexity,
		}
		for s in path
	]
