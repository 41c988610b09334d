"""Orthonormal 2-D Haar transform and its quad-tree.

Coefficients are stored in the usual quadrant layout: after each level the
current top-left block holds LL, top-right HL, bottom-left LH and
bottom-right HH.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional
import math

import numpy as np


_SQRT2 = math.sqrt(2.0)


class WaveletError(ValueError):
	pass


def _is_pow2(x: int) -> bool:
	return x >= 1 and (x & (x - 1)) == 0


def full_levels(h: int, w: int) -> int:
	return int(math.log2(min(h, w)))


def _check_levels(h: int, w: int, levels: Optional[int]) -> int:
	if not (_is_pow2(h) and _is_pow2(w)):
		raise WaveletError(f"Image sides must be powers of two, got {h}x{w}")
	top = full_levels(h, w)
	if levels is None:
		return top
	levels = int(levels)
	if levels < 0 or levels > top:
		raise WaveletError(f"levels must lie in [0, {top}] for a {h}x{w} image, got {levels}")
	return levels


@dataclass
class WaveletGrid:
	coefficients: np.ndarray
	levels: int

	@property
	def shape(self):
		return self.coefficients.shape


def haar2_forward(image: np.ndarray, levels: Optional[int] = None) -> WaveletGrid:
	img = np.asarray(image, dtype=np.float64)
	if img.ndim != 2:
		raise WaveletError(f"Expected a 2-D image, got shape {img.shape}")
	h, w = img.shape
	levels = _check_levels(h, w, levels)
	out = img.copy()
	hh, ww = h, w
	for _ in range(levels):
		a = out[:hh, :ww]
		rows = np.vstack(((a[0::2] + a[1::2]) / _SQRT2, (a[0::2] - a[1::2]) / _SQRT2))
		out[:hh, :ww] = np.hstack(
			((rows[:, 0::2] + rows[:, 1::2]) / _SQRT2, (rows[:, 0::2] - rows[:, 1::2]) / _SQRT2)
		)
		hh //= 2
		ww //= 2
	return WaveletGrid(out, levels)


def haar2_inverse(grid: WaveletGrid) -> np.ndarray:
	coef = np.asarray(grid.coefficients, dtype=np.float64)
	if coef.ndim != 2:
		raise WaveletError(f"Expected 2-D coefficients, got shape {coef.shape}")
	h, w = coef.shape
	levels = _check_levels(h, w, grid.levels)
	out = coef.copy()
	for level in range(levels, 0, -1):
		hh, ww = h >> (level - 1), w >> (level - 1)
		a = out[:hh, :ww]
		lo, hi = a[:, : ww // 2], a[:, ww // 2 :]
		cols = np.empty_like(a)
		cols[:, 0::2] = (lo + hi) / _SQRT2
		cols[:, 1::2] = (lo - hi) / _SQRT2
		lo, hi = cols[: hh // 2], cols[hh // 2 :]
		rows = np.empty_like(a)
		rows[0::2] = (lo + hi) / _SQRT2
		rows[1::2] = (lo - hi) / _SQRT2
		out[:hh, :ww] = rows
	return out


@dataclass
class WaveletTree:
	"""Parent links over the row-major flattened coefficient grid (-1 marks a root)."""

	h: int
	w: int
	levels: int
	parent: np.ndarray

	@property
	def p(self) -> int:
		return self.h * self.w

	def as_parent_array(self) -> List[int]:
		return [int(x) for x in self.parent]

	def children(self, node: int) -> np.ndarray:
		return np.flatnonzero(self.parent == node)

	def roots(self) -> np.ndarray:
		return np.flatnonzero(self.parent == -1)


def _band_origins(h: int, w: int, level: int):
	hs, ws = h >> level, w >> level
	return hs, ws, ((0, ws), (hs, 0), (hs, ws))


def wavelet_tree(h: int, w: int, levels: Optional[int] = None) -> WaveletTree:
	"""Quad-tree of a `levels`-deep Haar grid.

	A detail coefficient at level l has its four children at the same position
	of the same band one level finer. The coarsest details hang off the LL
	coefficient at the matching position; LL coefficients are roots.
	"""
	levels = _check_levels(h, w, levels)
	parent = np.full(h * w, -1, dtype=np.int64)
	for level in range(1, levels + 1):
		hs, ws, origins = _band_origins(h, w, level)
		ii, jj = np.meshgrid(np.arange(hs), np.arange(ws), indexing="ij")
		if level < levels:
			_, _, up = _band_origins(h, w, level + 1)
		for band, (r0, c0) in enumerate(origins):
			nodes = (r0 + ii) * w + (c0 + jj)
			if level < levels:
				pr, pc = up[band]
				parent[nodes] = (pr + ii // 2) * w + (pc + jj // 2)
			else:
				parent[nodes] = ii * w + jj
	return WaveletTree(h=h, w=w, levels=levels, parent=parent)
