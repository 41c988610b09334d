import math

import numpy as np
import pytest

from struct_sparsity.blocks import line_connected_blocks, singleton_blocks
from struct_sparsity.coding import (
	BlockInducedCoding,
	CodingError,
	CodingScheme,
	EnumerationLimitError,
	GraphCoding,
	GroupCoding,
	NonUniformSingletonCoding,
	StandardCoding,
	TreeCoding,
	check_subadditive,
	enumerate_supports,
	heap_binary_tree,
	kraft_sum,
	leaf_binary_tree,
	scheme_from_descriptor,
)
from struct_sparsity.wavelet import wavelet_tree


LOG3 = math.log2(3)


def test_standard_complexity_of_strong_sparse_setting():
	scheme = StandardCoding(512)
	assert scheme.complexity(range(64)) == pytest.approx(704.0)
	assert scheme.code_length(range(64)) == pytest.approx(640.0)


def test_empty_support_costs_nothing():
	for scheme in (StandardCoding(8), GroupCoding.equal(8, 2), GraphCoding.line(8)):
		assert scheme.complexity([]) == 0.0


def test_standard_kraft_sum_closed_form():
	# (1 + 1/(2p))^p - 1 for p = 4
	assert kraft_sum(StandardCoding(4)) == pytest.approx((1 + 1 / 8) ** 4 - 1, abs=1e-12)
	assert kraft_sum(StandardCoding(4)) == pytest.approx(0.6018, abs=1e-4)


def test_group_coding_union_of_groups():
	scheme = GroupCoding.equal(8, 2)
	assert scheme.complexity([0, 1]) == pytest.approx(5.0)
	assert scheme.complexity([0, 1, 2, 3]) == pytest.approx(10.0)
	assert math.isinf(scheme.complexity([0]))


def test_group_vector_complexity_rounds_up_to_groups():
	scheme = GroupCoding.equal(8, 2)
	beta = np.zeros(8)
	beta[0] = 1.0
	assert scheme.vector_complexity(beta) == pytest.approx(5.0)


def test_group_coding_rejects_overlap():
	with pytest.raises(CodingError):
		GroupCoding([[0, 1], [1, 2]], p=3)


def test_nonuniform_costs_and_kraft_check():
	scheme = NonUniformSingletonCoding([1.0, 2.0, 3.0, 3.0])
	assert scheme.code_length([1, 3]) == pytest.approx(2 + 2 + 3)
	with pytest.raises(CodingError):
		NonUniformSingletonCoding([0.5, 0.5])


def test_graph_line_components_and_costs():
	scheme = GraphCoding.line(8)
	assert scheme.node_cost == 3.0
	assert scheme.component_cost == pytest.approx(3.0)
	assert scheme.complexity([2, 3, 4]) == pytest.approx(3 + 3 + 9)
	assert scheme.complexity([2, 4]) == pytest.approx(2 + 2 * 3 + 6)


def test_graph_strong_sparse_reference_complexity():
	# 64 nonzeros in 4 runs on a path of 512 nodes
	scheme = GraphCoding.line(512)
	F = np.concatenate([np.arange(s, s + 16) for s in (10, 100, 300, 450)])
	assert scheme.complexity(F) == pytest.approx(64 * 4 + 4 * 9)


def test_graph_increment_oracle_merging_runs():
	scheme = GraphCoding.line(8)
	inc = scheme.increment_oracle([2, 4])
	assert inc(np.array([3])) == pytest.approx(1.0)
	assert inc(np.array([6])) == pytest.approx(4 + 3)
	assert inc(np.array([], dtype=np.int64)) == 0.0


def test_graph_increment_oracle_matches_direct_difference_on_grid():
	scheme = GraphCoding.grid(4, 4)
	rng = np.random.default_rng(7)
	for _ in range(50):
		F = np.sort(rng.choice(16, size=int(rng.integers(0, 8)), replace=False))
		rest = np.setdiff1d(np.arange(16), F)
		N = rng.choice(rest, size=int(rng.integers(1, 5)), replace=False)
		expected = scheme.complexity(np.union1d(F, N)) - scheme.complexity(F)
		assert scheme.increment_oracle(F)(N) == pytest.approx(expected)


def test_tree_coding_leaf_tree():
	scheme = TreeCoding(leaf_binary_tree(2), p=4)
	# leaf 0 -> its parent and the root are visited
	assert scheme.code_length([0]) == pytest.approx(2 * LOG3)
	assert scheme.code_length([0, 1, 2, 3]) == pytest.approx(3 * LOG3)
	assert kraft_sum(scheme) == pytest.approx(1.0, abs=1e-9)


def test_tree_coding_heap_and_wavelet_trees_are_complete_codes():
	assert kraft_sum(TreeCoding(heap_binary_tree(2))) == pytest.approx(1.0, abs=1e-9)
	assert kraft_sum(TreeCoding(wavelet_tree(2, 4).as_parent_array())) == pytest.approx(1.0, abs=1e-9)


def test_tree_coding_linear_in_support_plus_depth():
	depth = 4
	scheme = TreeCoding(leaf_binary_tree(depth), p=2**depth)
	rng = np.random.default_rng(3)
	for _ in range(20):
		F = rng.choice(2**depth, size=int(rng.integers(1, 9)), replace=False)
		assert scheme.code_length(F) <= LOG3 * (len(F) - 1 + 2 * depth) + 1e-9


def test_tree_increment_oracle_matches_direct_difference():
	scheme = TreeCoding(heap_binary_tree(3))
	rng = np.random.default_rng(11)
	for _ in range(30):
		F = np.sort(rng.choice(15, size=int(rng.integers(0, 6)), replace=False))
		N = rng.choice(np.setdiff1d(np.arange(15), F), size=int(rng.integers(1, 4)), replace=False)
		expected = scheme.complexity(np.union1d(F, N)) - scheme.complexity(F)
		assert scheme.increment_oracle(F)(N) == pytest.approx(expected)


def test_block_induced_exact_prefers_larger_block():
	scheme = BlockInducedCoding(line_connected_blocks(6, 2), "exact")
	logp = math.log2(6)
	assert scheme.code_length([0]) == pytest.approx(logp + 2)
	assert scheme.code_length([0, 1]) == pytest.approx(logp + 3)
	assert scheme.complexity([0, 1]) == pytest.approx(2 + logp + 3)


def test_block_induced_greedy_upper_bounds_exact():
	blocks = line_connected_blocks(10, 3)
	exact = BlockInducedCoding(blocks, "exact")
	greedy = BlockInducedCoding(blocks, "greedy")
	for F in ([0, 1, 2, 3], [1, 2, 5, 6, 7, 9], list(range(10))):
		assert greedy.code_length(F) >= exact.code_length(F) - 1e-9


def test_block_induced_exact_refuses_large_p():
	with pytest.raises(EnumerationLimitError):
		BlockInducedCoding(singleton_blocks(32), "exact")


def test_subadditivity_holds_for_builtin_schemes():
	assert check_subadditive(StandardCoding(6))
	assert check_subadditive(GraphCoding.line(7))
	assert check_subadditive(BlockInducedCoding(line_connected_blocks(7, 3), "exact"))


class _PairPenalty(CodingScheme):
	kind = "pair-penalty"

	def _length(self, idx):
		return 1.0 if idx.size == 1 else 10.0

	def to_descriptor(self):
		return {"kind": self.kind}


def test_subadditivity_reports_counterexample():
	res = check_subadditive(_PairPenalty(3))
	assert not res
	a, b = res.counterexample
	assert len(set(a) | set(b)) >= 2


def test_enumeration_limit():
	with pytest.raises(EnumerationLimitError):
		kraft_sum(StandardCoding(20))
	with pytest.raises(EnumerationLimitError):
		next(enumerate_supports(20))
	assert sum(1 for _ in enumerate_supports(4)) == 15


def test_scheme_from_descriptor_uses_geometry():
	scheme = scheme_from_descriptor({"kind": "graph"}, {"kind": "grid", "h": 3, "w": 4, "p": 12})
	assert isinstance(scheme, GraphCoding)
	assert scheme.shape == (3, 4)
	tree = scheme_from_descriptor({"kind": "tree"}, {"kind": "wavelet", "h": 4, "w": 4, "levels": 2, "p": 16})
	assert isinstance(tree, TreeCoding)
	assert tree.p == 16
	with pytest.raises(CodingError):
		scheme_from_descriptor({"kind": "nope"})


def test_descriptor_rebuilds_equivalent_grid_scheme():
	original = GraphCoding.grid(3, 3)
	rebuilt = scheme_from_descriptor(original.to_descriptor())
	F = [0, 1, 4, 8]
	assert rebuilt.complexity(F) == pytest.approx(original.complexity(F))
