"""Coding-length schemes over support sets.

A scheme assigns cl(F) bits to every support F of [0, p) with cl(empty) = 0 and
sum over nonempty F of 2^-cl(F) <= 1. The coding complexity is c(F) = |F| + cl(F).
Unrepresentable supports have length math.inf.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import math

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .blocks import (
	EXACT_COVER_LIMIT,
	BlockSet,
	blockset_from_descriptor,
	exact_min_cover,
	greedy_min_cover,
	_mask,
)
from .linalg import SupportLike, as_support, support_of


LOG2_3 = math.log2(3.0)
KRAFT_LIMIT = 12
SUBADDITIVE_LIMIT = 10

IncrementOracle = Callable[[np.ndarray], float]


class CodingError(ValueError):
	pass


class EnumerationLimitError(ValueError):
	pass


class CodingScheme(ABC):
	kind: str = "abstract"

	def __init__(self, p: int):
		if p < 1:
			raise CodingError("p must be >= 1")
		self.p = int(p)

	@abstractmethod
	def _length(self, idx: np.ndarray) -> float:
		"""Coding length of a nonempty, sorted, validated support."""

	@abstractmethod
	def to_descriptor(self) -> Dict[str, Any]:
		...

	def code_length(self, F: SupportLike) -> float:
		idx = as_support(F, self.p)
		if idx.size == 0:
			return 0.0
		return float(self._length(idx))

	def complexity(self, F: SupportLike) -> float:
		idx = as_support(F, self.p)
		if idx.size == 0:
			return 0.0
		return idx.size + float(self._length(idx))

	def vector_complexity(self, beta: np.ndarray) -> float:
		return self.complexity(support_of(beta))

	def increment_oracle(self, F: SupportLike) -> IncrementOracle:
		"""Callable N -> c(F u N) - c(F) for index arrays N disjoint from F."""
		base_idx = as_support(F, self.p)
		base = self.complexity(base_idx)

		def increment(novel: np.ndarray) -> float:
			if len(novel) == 0:
				return 0.0
			return self.complexity(np.union1d(base_idx, novel)) - base

		return increment

	def __repr__(self) -> str:
		return f"{type(self).__name__}(p={self.p})"


class StandardCoding(CodingScheme):
	kind = "standard"

	def _length(self, idx: np.ndarray) -> float:
		return idx.size * math.log2(2 * self.p)

	def to_descriptor(self) -> Dict[str, Any]:
		return {"kind": self.kind, "p": self.p}


class NonUniformSingletonCoding(CodingScheme):
	kind = "nonuniform"

	def __init__(self, costs: Sequence[float]):
		super().__init__(len(costs))
		self.costs = np.asarray(costs, dtype=np.float64)
		if np.any(self.costs < 0):
			raise CodingError("Per-feature costs must be non-negative")
		kraft = float(np.sum(2.0 ** (-self.costs)))
		if kraft > 1.0 + 1e-12:
			raise CodingError(f"Per-feature costs violate Kraft: sum 2^-c_j = {kraft:.6f}")

	def _length(self, idx: np.ndarray) -> float:
		return idx.size + float(np.sum(self.costs[idx]))

	def to_descriptor(self) -> Dict[str, Any]:
		return {"kind": self.kind, "costs": self.costs.tolist()}


class GroupCoding(CodingScheme):
	"""cl(F) = g log2(2m) when F is a union of g groups, +inf otherwise."""

	kind = "group"

	def __init__(self, groups: Sequence[Sequence[int]], p: Optional[int] = None):
		groups = [sorted(int(j) for j in g) for g in groups]
		if p is None:
			p = 1 + max(max(g) for g in groups)
		super().__init__(p)
		self.groups = [np.asarray(g, dtype=np.int64) for g in groups]
		self.group_of = np.full(self.p, -1, dtype=np.int64)
		for gi, g in enumerate(self.groups):
			if g.size == 0:
				raise CodingError(f"Group {gi} is empty")
			if np.any(self.group_of[g] >= 0):
				raise CodingError(f"Group {gi} overlaps an earlier group")
			self.group_of[g] = gi
		if np.any(self.group_of < 0):
			raise CodingError("Groups do not cover [0, p)")
		self.sizes = np.array([g.size for g in self.groups], dtype=np.int64)
		self.m = len(self.groups)

	@classmethod
	def equal(cls, p: int, group_size: int) -> "GroupCoding":
		return cls([list(range(s, min(s + group_size, p))) for s in range(0, p, group_size)], p)

	def touched_groups(self, idx: np.ndarray) -> np.ndarray:
		return np.unique(self.group_of[idx])

	def _length(self, idx: np.ndarray) -> float:
		touched = self.touched_groups(idx)
		if int(self.sizes[touched].sum()) != idx.size:
			return math.inf
		return touched.size * math.log2(2 * self.m)

	def vector_complexity(self, beta: np.ndarray) -> float:
		idx = support_of(beta)
		if idx.size == 0:
			return 0.0
		cover = np.concatenate([self.groups[g] for g in self.touched_groups(idx)])
		return self.complexity(cover)

	def to_descriptor(self) -> Dict[str, Any]:
		return {"kind": self.kind, "p": self.p, "groups": [g.tolist() for g in self.groups]}


class GraphCoding(CodingScheme):
	"""cl(F) = g * component_cost + node_cost * |F|, g = connected components of F."""

	kind = "graph"

	def __init__(
		self,
		adjacency,
		node_cost: Optional[float] = None,
		component_cost: Optional[float] = None,
		name: str = "custom",
		shape: Optional[Tuple[int, ...]] = None,
	):
		adj = sparse.csr_matrix(adjacency, dtype=np.int8)
		if adj.shape[0] != adj.shape[1]:
			raise CodingError("Adjacency must be square")
		super().__init__(adj.shape[0])
		adj = ((adj + adj.T) > 0).astype(np.int8).tocsr()
		adj.setdiag(0)
		adj.eliminate_zeros()
		self.adjacency = adj
		self.neighbors = [adj.indices[adj.indptr[v] : adj.indptr[v + 1]] for v in range(self.p)]
		max_degree = int(np.diff(adj.indptr).max()) if self.p else 0
		self.node_cost = float(1 + max_degree) if node_cost is None else float(node_cost)
		self.component_cost = math.log2(self.p) if component_cost is None else float(component_cost)
		self.name = name
		self.shape = shape

	@classmethod
	def line(cls, p: int, **kwargs) -> "GraphCoding":
		rows = np.arange(p - 1)
		adj = sparse.coo_matrix((np.ones(p - 1), (rows, rows + 1)), shape=(p, p))
		return cls(adj, name="line", shape=(p,), **kwargs)

	@classmethod
	def grid(cls, h: int, w: int, **kwargs) -> "GraphCoding":
		idx = np.arange(h * w).reshape(h, w)
		right = (idx[:, :-1].ravel(), idx[:, 1:].ravel())
		down = (idx[:-1, :].ravel(), idx[1:, :].ravel())
		rows = np.concatenate([right[0], down[0]])
		cols = np.concatenate([right[1], down[1]])
		adj = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(h * w, h * w))
		return cls(adj, name="grid", shape=(h, w), **kwargs)

	def components(self, idx: np.ndarray) -> int:
		sub = self.adjacency[idx][:, idx]
		return int(connected_components(sub, directed=False)[0])

	def _length(self, idx: np.ndarray) -> float:
		return self.components(idx) * self.component_cost + self.node_cost * idx.size

	def increment_oracle(self, F: SupportLike) -> IncrementOracle:
		base_idx = as_support(F, self.p)
		root: Dict[int, int] = {int(v): int(v) for v in base_idx}

		def find(table: Dict[int, int], v: int) -> int:
			while table[v] != v:
				table[v] = table[table[v]]
				v = table[v]
			return v

		for v in root:
			for u in self.neighbors[v]:
				u = int(u)
				if u in root:
					a, b = find(root, v), find(root, u)
					if a != b:
						root[a] = b
		root = {v: find(root, v) for v in list(root)}
		per_node = 1.0 + self.node_cost

		def increment(novel: np.ndarray) -> float:
			overlay: Dict[int, int] = {}

			def rep(v: int) -> int:
				r = root[v] if v in root else v
				while overlay.get(r, r) != r:
					r = overlay[r]
				return r

			merged = 0
			added = 0
			for v in (int(x) for x in novel):
				if v in root or v in overlay:
					continue
				overlay[v] = v
				added += 1
				for u in self.neighbors[v]:
					u = int(u)
					if u in root or u in overlay:
						a, b = rep(v), rep(u)
						if a != b:
							overlay[a] = b
							overlay.setdefault(b, b)
							merged += 1
			return added * per_node + (added - merged) * self.component_cost

		return increment

	def to_descriptor(self) -> Dict[str, Any]:
		d: Dict[str, Any] = {"kind": self.kind, "node_cost": self.node_cost, "component_cost": self.component_cost}
		if self.name == "line":
			d.update(graph="line", p=self.p)
		elif self.name == "grid" and self.shape is not None:
			d.update(graph="grid", h=self.shape[0], w=self.shape[1])
		else:
			coo = sparse.triu(self.adjacency).tocoo()
			d.update(graph="edges", p=self.p, edges=[[int(a), int(b)] for a, b in zip(coo.row, coo.col)])
		return d


def leaf_binary_tree(depth: int) -> List[int]:
	"""Complete binary tree whose 2^depth leaves are the variables 0..2^depth-1.

	Internal nodes follow the leaves (root last) and are not variables.
	"""
	leaves = 2 ** depth
	parent: List[int] = [-1] * (2 * leaves - 1)
	level = list(range(leaves))
	nxt = leaves
	while len(level) > 1:
		up = []
		for a, b in zip(level[0::2], level[1::2]):
			parent[a] = nxt
			parent[b] = nxt
			up.append(nxt)
			nxt += 1
		level = up
	return parent


def heap_binary_tree(depth: int) -> List[int]:
	"""Complete binary tree in heap order; every node is a variable."""
	return [-1] + [(i - 1) // 2 for i in range(1, 2 ** (depth + 1) - 1)]


class TreeCoding(CodingScheme):
	"""Top-down decision coding on a rooted tree.

	Walking from the root, each visited node with d children states which
	children lead to F: log2(2^d - 1) bits, or log2(2^(d+1) - 1) bits when the
	node is itself a variable (it also states its own membership). On a binary
	tree with the variables at the leaves this is log2(3) per internal node on
	the union of root-to-element paths.
	"""

	kind = "tree"

	def __init__(self, parent: Sequence[int], p: Optional[int] = None):
		parent = [int(x) for x in parent]
		super().__init__(len(parent) if p is None else p)
		if self.p > len(parent):
			raise CodingError("Tree has fewer nodes than variables")
		self.source_parent = list(parent)
		roots = [v for v, u in enumerate(parent) if u == -1]
		if not roots:
			raise CodingError("Tree has no root")
		if len(roots) > 1:
			virtual = len(parent)
			parent = parent + [-1]
			for r in roots:
				parent[r] = virtual
			self.root = virtual
		else:
			self.root = roots[0]
		self.parent = np.asarray(parent, dtype=np.int64)
		n_nodes = self.parent.size
		children = np.zeros(n_nodes, dtype=np.int64)
		for v, u in enumerate(parent):
			if u >= 0:
				if u >= n_nodes:
					raise CodingError(f"Node {v} has unknown parent {u}")
				children[u] += 1
		self.children = children
		self.depth = np.zeros(n_nodes, dtype=np.int64)
		for v in range(n_nodes):
			d, u = 0, v
			while parent[u] != -1:
				u = parent[u]
				d += 1
				if d > n_nodes:
					raise CodingError("Parent map contains a cycle")
			self.depth[v] = d
		is_var = np.arange(n_nodes) < self.p
		options = np.where(is_var, 2.0 ** (children + 1) - 1, 2.0 ** children - 1)
		self.node_bits = np.where(children > 0, np.log2(np.maximum(options, 1.0)), 0.0)

	def visited(self, idx: np.ndarray) -> set:
		seen: set = set()
		for v in (int(x) for x in idx):
			while v != -1 and v not in seen:
				seen.add(v)
				v = int(self.parent[v])
		return seen

	def internal_nodes_on_paths(self, idx: np.ndarray) -> int:
		return sum(1 for v in self.visited(idx) if self.children[v] > 0)

	def _length(self, idx: np.ndarray) -> float:
		return float(sum(self.node_bits[v] for v in self.visited(idx)))

	def increment_oracle(self, F: SupportLike) -> IncrementOracle:
		base_idx = as_support(F, self.p)
		seen = self.visited(base_idx)
		members = set(int(v) for v in base_idx)

		def increment(novel: np.ndarray) -> float:
			extra: set = set()
			added = 0
			bits = 0.0
			for v in (int(x) for x in novel):
				if v in members:
					continue
				added += 1
				while v != -1 and v not in seen and v not in extra:
					extra.add(v)
					bits += self.node_bits[v]
					v = int(self.parent[v])
			return added + bits

		return increment

	def to_descriptor(self) -> Dict[str, Any]:
		return {"kind": self.kind, "p": self.p, "parent": list(self.source_parent)}


class BlockInducedCoding(CodingScheme):
	"""cl(F) = min over exact covers F = B_1 u ... u B_k of sum (cl0(B_j) + 1).

	mode "exact" solves the cover by branch and bound (p <= 16); "greedy" and
	"tracked" use the cost-effectiveness greedy, an upper bound. Under "tracked"
	StructOMP accumulates cl0(B) + 1 per selected block instead of re-covering.
	"""

	kind = "block"
	MODES = ("exact", "greedy", "tracked")

	def __init__(self, blocks: BlockSet, mode: str = "exact"):
		super().__init__(blocks.p)
		if mode not in self.MODES:
			raise CodingError(f"Unknown block coding mode {mode!r}")
		if mode == "exact" and blocks.p > EXACT_COVER_LIMIT:
			raise EnumerationLimitError(f"Exact block coding supports p <= {EXACT_COVER_LIMIT}, got {blocks.p}")
		self.blocks = blocks
		self.mode = mode
		self._candidates = [(blocks.mask(i), blocks[i].base_length + 1.0) for i in blocks.finite_ids()]

	@property
	def tracked(self) -> bool:
		return self.mode == "tracked"

	def _cover(self, target: int, candidates, union_weight: float = 0.0) -> float:
		if self.mode == "exact":
			return exact_min_cover(target, candidates, union_weight)
		return greedy_min_cover(target, candidates, union_weight)

	def _length(self, idx: np.ndarray) -> float:
		target = _mask(idx.tolist())
		inside = [(m, w) for m, w in self._candidates if (m & ~target) == 0]
		return self._cover(target, inside)

	def vector_complexity(self, beta: np.ndarray) -> float:
		idx = support_of(beta)
		if idx.size == 0:
			return 0.0
		over = self._cover(_mask(idx.tolist()), self._candidates, union_weight=1.0)
		return min(over, self.complexity(idx))

	def to_descriptor(self) -> Dict[str, Any]:
		return {"kind": self.kind, "mode": self.mode, "blocks": self.blocks.to_descriptor()}


# ---------------------------------------------------------------------------
# module-level operations

def code_length(scheme: CodingScheme, F: SupportLike) -> float:
	return scheme.code_length(F)


def complexity(scheme: CodingScheme, F: SupportLike) -> float:
	return scheme.complexity(F)


def vector_complexity(scheme: CodingScheme, beta: np.ndarray) -> float:
	return scheme.vector_complexity(beta)


def _length_table(scheme: CodingScheme, limit: int) -> np.ndarray:
	p = scheme.p
	if p > limit:
		raise EnumerationLimitError(f"Enumeration over 2^{p} subsets refused (limit p <= {limit})")
	table = np.zeros(1 << p)
	for mask in range(1, 1 << p):
		idx = np.array([j for j in range(p) if mask >> j & 1], dtype=np.int64)
		table[mask] = scheme.code_length(idx)
	return table


def kraft_sum(scheme: CodingScheme, limit: int = KRAFT_LIMIT) -> float:
	"""Exact sum of 2^-cl(F) over every nonempty F."""
	table = _length_table(scheme, limit)
	return float(np.sum(np.exp2(-table[1:])))


@dataclass
class SubadditivityResult:
	holds: bool
	counterexample: Optional[Tuple[List[int], List[int]]] = None

	def __bool__(self) -> bool:
		return self.holds


def check_subadditive(scheme: CodingScheme, limit: int = SUBADDITIVE_LIMIT, tol: float = 1e-9) -> SubadditivityResult:
	"""Check cl(F u F') <= cl(F) + cl(F') for every pair of subsets."""
	table = _length_table(scheme, limit)
	masks = np.arange(table.size)
	union = masks[:, None] | masks[None, :]
	lhs = table[union]
	rhs = table[:, None] + table[None, :]
	bad = np.argwhere(lhs > rhs + tol)
	if bad.size == 0:
		return SubadditivityResult(True)
	a, b = (int(x) for x in bad[0])
	p = scheme.p
	return SubadditivityResult(
		False,
		([j for j in range(p) if a >> j & 1], [j for j in range(p) if b >> j & 1]),
	)


def enumerate_supports(p: int, limit: int = 16):
	"""All nonempty supports of [0, p) as sorted index arrays, by size then lexicographically."""
	if p > limit:
		raise EnumerationLimitError(f"Enumeration over 2^{p} subsets refused (limit p <= {limit})")
	for k in range(1, p + 1):
		for combo in combinations(range(p), k):
			yield np.asarray(combo, dtype=np.int64)


def scheme_from_descriptor(d: Dict[str, Any], geometry: Optional[Dict[str, Any]] = None) -> CodingScheme:
	"""Inverse of CodingScheme.to_descriptor; missing sizes are read from `geometry`."""
	geometry = geometry or {}
	kind = d.get("kind")

	def _get(key: str):
		if key in d:
			return d[key]
		if key in geometry:
			return geometry[key]
		raise CodingError(f"Scheme descriptor {kind!r} needs {key!r}")

	if kind == "standard":
		return StandardCoding(int(_get("p")))
	if kind == "nonuniform":
		return NonUniformSingletonCoding(d["costs"])
	if kind == "group":
		if "groups" in d:
			return GroupCoding(d["groups"], d.get("p"))
		return GroupCoding.equal(int(_get("p")), int(d["group_size"]))
	if kind == "graph":
		costs = {k: d[k] for k in ("node_cost", "component_cost") if d.get(k) is not None}
		graph = d.get("graph", geometry.get("kind"))
		if graph == "line":
			return GraphCoding.line(int(_get("p")), **costs)
		if graph == "grid":
			return GraphCoding.grid(int(_get("h")), int(_get("w")), **costs)
		if graph == "edges":
			p = int(_get("p"))
			edges = np.asarray(d["edges"], dtype=np.int64).reshape(-1, 2)
			adj = sparse.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(p, p))
			return GraphCoding(adj, **costs)
		raise CodingError(f"Unknown graph type {graph!r}")
	if kind == "tree":
		if "parent" in d:
			return TreeCoding(d["parent"], d.get("p"))
		from .wavelet import wavelet_tree

		tree = wavelet_tree(int(_get("h")), int(_get("w")), d.get("levels", geometry.get("levels")))
		return TreeCoding(tree.as_parent_array())
	if kind == "block":
		return BlockInducedCoding(blockset_from_descriptor(d["blocks"], geometry), d.get("mode", "exact"))
	raise CodingError(f"Unknown coding scheme kind: {kind!r}")
