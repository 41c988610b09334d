from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple
import math

import numpy as np

from .restricted_eigen import restricted_eigs
from .linalg import support_of


# exact branch-and-bound covers are limited to this many features
EXACT_COVER_LIMIT = 16


class BlockSetError(ValueError):
	pass


@dataclass(frozen=True)
class Block:
	indices: Tuple[int, ...]
	base_length: float

	@property
	def size(self) -> int:
		return len(self.indices)

	@property
	def finite(self) -> bool:
		return math.isfinite(self.base_length)


def _mask(indices: Sequence[int]) -> int:
	m = 0
	for j in indices:
		m |= 1 << int(j)
	return m


def _popcount(x: int) -> int:
	return bin(x).count("1")


@dataclass
class BlockSet:
	blocks: List[Block]
	p: int
	descriptor: Optional[Dict[str, Any]] = None
	_arrays: List[np.ndarray] = field(init=False, repr=False)
	_masks: List[int] = field(init=False, repr=False)

	def __post_init__(self) -> None:
		self._arrays = [np.asarray(b.indices, dtype=np.int64) for b in self.blocks]
		self._masks = [_mask(b.indices) for b in self.blocks]

	def __len__(self) -> int:
		return len(self.blocks)

	def __iter__(self) -> Iterator[Block]:
		return iter(self.blocks)

	def __getitem__(self, block_id: int) -> Block:
		return self.blocks[block_id]

	def indices(self, block_id: int) -> np.ndarray:
		return self._arrays[block_id]

	def mask(self, block_id: int) -> int:
		return self._masks[block_id]

	def finite_ids(self) -> List[int]:
		return [i for i, b in enumerate(self.blocks) if b.finite]

	def kraft_sum(self) -> float:
		return float(sum(2.0 ** (-b.base_length) for b in self.blocks if b.finite))

	def validate(self) -> "BlockSet":
		covered = 0
		singletons = set()
		for i, b in enumerate(self.blocks):
			if not b.indices:
				raise BlockSetError(f"Block {i} is empty")
			if min(b.indices) < 0 or max(b.indices) >= self.p:
				raise BlockSetError(f"Block {i} has indices outside [0, {self.p})")
			if b.base_length < 0:
				raise BlockSetError(f"Block {i} has negative base length {b.base_length}")
			covered |= self._masks[i]
			if b.size == 1:
				singletons.add(b.indices[0])
		if covered != (1 << self.p) - 1:
			raise BlockSetError("Blocks do not cover every feature")
		if len(singletons) != self.p:
			missing = sorted(set(range(self.p)) - singletons)[:5]
			raise BlockSetError(f"Missing singleton blocks, e.g. {missing}")
		kraft = self.kraft_sum()
		if kraft > 1.0 + 1e-9:
			raise BlockSetError(f"Base-block Kraft sum {kraft:.6f} exceeds 1")
		return self

	def to_descriptor(self) -> Dict[str, Any]:
		if self.descriptor is not None:
			return dict(self.descriptor)
		return {
			"kind": "explicit",
			"p": self.p,
			"blocks": [
				{"indices": list(b.indices), "base_length": b.base_length if b.finite else "inf"}
				for b in self.blocks
			],
		}


def default_max_size(p: int, delta: Optional[float] = None) -> int:
	"""Largest connected block for line/grid dictionaries.

	Without `delta` this is max(2, ceil(log2 p)); with it, delta * log2(p) / 5.
	"""
	if p <= 1:
		return 1
	if delta is None:
		return max(2, int(math.ceil(math.log2(p))))
	return max(1, int(round(delta * math.log2(p) / 5.0)))


def singleton_blocks(p: int) -> BlockSet:
	if p < 1:
		raise BlockSetError("p must be >= 1")
	cl0 = math.log2(p)
	blocks = [Block((j,), cl0) for j in range(p)]
	return BlockSet(blocks, p, {"kind": "singleton", "p": p})


def group_blocks(
	groups: Sequence[Sequence[int]],
	p: Optional[int] = None,
	base_lengths: Optional[Sequence[float]] = None,
) -> BlockSet:
	"""Group dictionary: m groups at log2 m (or the given lengths), singletons at +inf."""
	groups = [tuple(sorted(int(j) for j in g)) for g in groups]
	if p is None:
		p = 1 + max((max(g) for g in groups if g), default=-1)
	seen: Dict[int, int] = {}
	for gi, g in enumerate(groups):
		if not g:
			raise BlockSetError(f"Group {gi} is empty")
		for j in g:
			if j in seen:
				raise BlockSetError(f"Feature {j} appears in groups {seen[j]} and {gi}")
			if j < 0 or j >= p:
				raise BlockSetError(f"Feature {j} outside [0, {p})")
			seen[j] = gi
	if len(seen) != p:
		raise BlockSetError("Groups do not partition [0, p)")
	m = len(groups)
	descriptor: Dict[str, Any] = {"kind": "group", "p": p, "groups": [list(g) for g in groups]}
	if base_lengths is None:
		base_lengths = [math.log2(m)] * m
	elif len(base_lengths) != m:
		raise BlockSetError(f"Expected {m} group lengths, got {len(base_lengths)}")
	else:
		descriptor["base_lengths"] = [float(x) for x in base_lengths]
	blocks = [Block(g, float(cl)) for g, cl in zip(groups, base_lengths)]
	group_set = set(groups)
	blocks += [Block((j,), math.inf) for j in range(p) if (j,) not in group_set]
	return BlockSet(blocks, p, descriptor)


def equal_groups(p: int, group_size: int) -> List[List[int]]:
	if group_size < 1:
		raise BlockSetError("group_size must be >= 1")
	return [list(range(s, min(s + group_size, p))) for s in range(0, p, group_size)]


def line_connected_blocks(p: int, max_size: Optional[int] = None) -> BlockSet:
	L = default_max_size(p) if max_size is None else int(max_size)
	if not 1 <= L <= p:
		raise BlockSetError(f"max_size must lie in [1, {p}], got {L}")
	logp = math.log2(p)
	blocks = [
		Block(tuple(range(start, start + length)), logp + length)
		for length in range(1, L + 1)
		for start in range(0, p - length + 1)
	]
	return BlockSet(blocks, p, {"kind": "line", "p": p, "max_size": L})


def grid_connected_blocks(h: int, w: int, max_size: Optional[int] = None) -> BlockSet:
	"""Axis-aligned rectangles of area <= max_size on an h x w grid (row-major)."""
	p = h * w
	L = default_max_size(p) if max_size is None else int(max_size)
	if L < 1:
		raise BlockSetError("max_size must be >= 1")
	shapes = sorted(
		((bh, bw) for bh in range(1, h + 1) for bw in range(1, w + 1) if bh * bw <= L),
		key=lambda s: (s[0] * s[1], s[0]),
	)
	per_area: Dict[int, int] = {}
	for bh, bw in shapes:
		per_area[bh * bw] = per_area.get(bh * bw, 0) + 1
	logp = math.log2(p)
	blocks: List[Block] = []
	for bh, bw in shapes:
		area = bh * bw
		cl0 = logp + area + math.log2(per_area[area])
		for r in range(h - bh + 1):
			for c in range(w - bw + 1):
				idx = tuple((r + i) * w + (c + j) for i in range(bh) for j in range(bw))
				blocks.append(Block(tuple(sorted(idx)), cl0))
	return BlockSet(blocks, p, {"kind": "grid", "h": h, "w": w, "max_size": L})


def tree_blocks(parent: Sequence[int], p: Optional[int] = None) -> BlockSet:
	"""Root-closed path blocks {v} + ancestors(v), one per variable.

	Nodes >= p are structural (not variables) and never appear in a block.
	Non-root singletons are kept at +inf so that every finite block is closed
	under the parent relation.
	"""
	parent = [int(x) for x in parent]
	p = len(parent) if p is None else int(p)
	logp = math.log2(p) if p > 1 else 0.0
	blocks: List[Block] = []
	path_blocks = set()
	for v in range(p):
		path = []
		u = v
		steps = 0
		while u != -1:
			if u < p:
				path.append(u)
			u = parent[u]
			steps += 1
			if steps > len(parent):
				raise BlockSetError("Parent map contains a cycle")
		block = tuple(sorted(path))
		path_blocks.add(block)
		blocks.append(Block(block, logp))
	blocks += [Block((j,), math.inf) for j in range(p) if (j,) not in path_blocks]
	return BlockSet(blocks, p, {"kind": "tree", "p": p, "parent": parent})


def blockset_from_descriptor(d: Dict[str, Any], geometry: Optional[Dict[str, Any]] = None) -> BlockSet:
	"""Build a block set from its JSON descriptor; missing sizes come from `geometry`."""
	geometry = geometry or {}
	kind = d.get("kind")

	def _get(key: str):
		if key in d:
			return d[key]
		if key in geometry:
			return geometry[key]
		raise BlockSetError(f"Block-set descriptor {kind!r} needs {key!r}")

	if kind == "singleton":
		return singleton_blocks(int(_get("p")))
	if kind == "group":
		if "groups" in d:
			return group_blocks(d["groups"], d.get("p"), d.get("base_lengths"))
		p = int(_get("p"))
		return group_blocks(equal_groups(p, int(d["group_size"])), p)
	if kind == "line":
		p = int(_get("p"))
		L = d.get("max_size")
		if L is None and d.get("delta") is not None:
			L = default_max_size(p, float(d["delta"]))
		return line_connected_blocks(p, L)
	if kind == "grid":
		h, w = int(_get("h")), int(_get("w"))
		L = d.get("max_size")
		if L is None and d.get("delta") is not None:
			L = default_max_size(h * w, float(d["delta"]))
		return grid_connected_blocks(h, w, L)
	if kind == "tree":
		if "parent" in d:
			return tree_blocks(d["parent"], d.get("p"))
		from .wavelet import wavelet_tree

		tree = wavelet_tree(int(_get("h")), int(_get("w")), d.get("levels", geometry.get("levels")))
		bs = tree_blocks(tree.as_parent_array())
		bs.descriptor = {"kind": "tree", "h": tree.h, "w": tree.w, "levels": tree.levels}
		return bs
	if kind == "explicit":
		blocks = [
			Block(tuple(sorted(int(j) for j in b["indices"])), float(b["base_length"]))
			for b in d["blocks"]
		]
		return BlockSet(blocks, int(d["p"]))
	raise BlockSetError(f"Unknown block-set kind: {kind!r}")


# ---------------------------------------------------------------------------
# covers

def exact_min_cover(
	target: int,
	candidates: Sequence[Tuple[int, float]],
	union_weight: float = 0.0,
) -> float:
	"""Branch-and-bound minimum of sum(w) + union_weight * |union| over covers of `target`.

	`candidates` are (bitmask, weight) pairs; covers may overshoot the target.
	"""
	if target == 0:
		return 0.0
	by_elem: Dict[int, List[Tuple[int, float]]] = {}
	for m, w in candidates:
		if not math.isfinite(w) or not (m & target):
			continue
		rest = m & target
		while rest:
			low = rest & -rest
			by_elem.setdefault(low.bit_length() - 1, []).append((m, w))
			rest ^= low
	for lst in by_elem.values():
		lst.sort(key=lambda mw: mw[1] + union_weight * _popcount(mw[0]))

	best = math.inf
	seen: Dict[int, float] = {}

	def search(covered: int, cost: float) -> None:
		nonlocal best
		if cost >= best:
			return
		remaining = target & ~covered
		if remaining == 0:
			best = cost
			return
		if seen.get(covered, math.inf) <= cost:
			return
		seen[covered] = cost
		e = (remaining & -remaining).bit_length() - 1
		for m, w in by_elem.get(e, []):
			search(covered | m, cost + w + union_weight * _popcount(m & ~covered))

	search(0, 0.0)
	return best


def greedy_min_cover(
	target: int,
	candidates: Sequence[Tuple[int, float]],
	union_weight: float = 0.0,
) -> float:
	"""Cost-effectiveness greedy for the same objective as exact_min_cover (an upper bound)."""
	usable = [(m, w) for m, w in candidates if math.isfinite(w) and (m & target)]
	covered = 0
	cost = 0.0
	while target & ~covered:
		remaining = target & ~covered
		best_ratio = math.inf
		pick = None
		for m, w in usable:
			gain = _popcount(m & remaining)
			if gain == 0:
				continue
			price = w + union_weight * _popcount(m & ~covered)
			ratio = price / gain
			if ratio < best_ratio:
				best_ratio, pick = ratio, (m, price)
		if pick is None:
			return math.inf
		covered |= pick[0]
		cost += pick[1]
	return cost


@dataclass
class BlockSetStats:
	rho0: float
	c0: float


def block_set_stats(blocks: BlockSet, X: np.ndarray, scheme) -> BlockSetStats:
	"""rho0 = max_B rho_+(B) and c0 = max_B c(B) over finite-length blocks."""
	rho0 = 0.0
	c0 = 0.0
	for i in blocks.finite_ids():
		idx = blocks.indices(i)
		rho0 = max(rho0, restricted_eigs(X, idx)[1])
		c0 = max(c0, scheme.complexity(idx))
	return BlockSetStats(rho0=rho0, c0=c0)


def block_cover_complexity(beta: np.ndarray, blocks: BlockSet, scheme, exact_limit: int = EXACT_COVER_LIMIT) -> float:
	"""min sum c(B_j) over block families whose union contains supp(beta)."""
	target = _mask(support_of(beta).tolist())
	if target == 0:
		return 0.0
	candidates = [(blocks.mask(i), scheme.complexity(blocks.indices(i))) for i in blocks.finite_ids()]
	if blocks.p <= exact_limit:
		return exact_min_cover(target, candidates)
	return greedy_min_cover(target, candidates)
