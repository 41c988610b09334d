import math

import numpy as np
import pytest

from struct_sparsity.baselines import omp
from struct_sparsity.blocks import (
	Block,
	BlockSet,
	equal_groups,
	grid_connected_blocks,
	group_blocks,
	line_connected_blocks,
	singleton_blocks,
)
from struct_sparsity.coding import BlockInducedCoding, GraphCoding, GroupCoding, StandardCoding
from struct_sparsity.linalg import DimensionError, support_of
from struct_sparsity.structomp import (
	GreedyConfig,
	GreedyError,
	complexity_increment,
	gain_phi,
	gain_phi_tilde,
	initial_state,
	last_within_budget,
	struct_omp,
	trace_rows,
)


def _orthonormal(n, p, seed=0):
	Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
	return Q


def test_single_block_recovered_in_one_step():
	X = _orthonormal(40, 32)
	beta = np.zeros(32)
	beta[5:9] = 1.0
	y = X @ beta
	scheme = GraphCoding.line(32)
	blocks = line_connected_blocks(32, 4)
	c = scheme.complexity([5, 6, 7, 8])
	assert c == pytest.approx(21.0)
	path = struct_omp(X, y, blocks, scheme, GreedyConfig(budget=2 * c))
	assert len(path) == 2
	assert path[0].iteration == 0 and path[0].support.size == 0
	assert path[1].support.tolist() == [5, 6, 7, 8]
	assert path[1].stop_reason == "exact_fit"
	np.testing.assert_allclose(path[1].coef, beta, atol=1e-10)


def test_whole_group_recovered_in_one_step():
	X = _orthonormal(40, 16, seed=3)
	beta = np.zeros(16)
	beta[4:8] = [1.0, -2.0, 0.5, 1.5]
	scheme = GroupCoding.equal(16, 4)
	c = scheme.complexity(range(4, 8))
	assert c == pytest.approx(4 + 3)
	path = struct_omp(X, X @ beta, group_blocks(equal_groups(16, 4), 16), scheme, GreedyConfig(budget=2 * c))
	assert len(path) == 2
	assert path[1].support.tolist() == [4, 5, 6, 7]
	assert path[1].complexity == pytest.approx(c)
	assert path[1].stop_reason == "exact_fit"


def test_grid_blob_recovered_in_one_step():
	X = _orthonormal(48, 36, seed=4)
	beta = np.zeros(36)
	blob = [8, 9, 14, 15]  # 2x2 square at rows 1-2, columns 2-3
	beta[blob] = 1.0
	scheme = GraphCoding.grid(6, 6)
	c = scheme.complexity(blob)
	assert c == pytest.approx(4 + math.log2(36) + 5 * 4)
	path = struct_omp(X, X @ beta, grid_connected_blocks(6, 6, 4), scheme, GreedyConfig(budget=2 * c))
	assert len(path) == 2
	assert path[1].support.tolist() == blob
	np.testing.assert_allclose(path[1].coef, beta, atol=1e-10)


def test_gains_on_first_iteration():
	X = _orthonormal(20, 10, seed=1)
	y = np.random.default_rng(2).standard_normal(20)
	scheme = StandardCoding(10)
	state = initial_state(X, y)
	inc = 1 + math.log2(20)
	for j in range(10):
		expected = float(X[:, j] @ y) ** 2 / inc
		assert gain_phi(X, y, state, [j], scheme) == pytest.approx(expected)
		assert gain_phi_tilde(X, y, state, [j], scheme) == pytest.approx(expected)


def test_gain_of_block_inside_support_is_zero():
	X = _orthonormal(20, 10, seed=1)
	y = np.ones(20)
	path = struct_omp(X, y, singleton_blocks(10), StandardCoding(10), GreedyConfig(budget=100.0, max_iterations=2))
	state = path[-1]
	j = int(state.support[0])
	assert gain_phi(X, y, state, [j], StandardCoding(10)) == 0.0
	assert complexity_increment(StandardCoding(10), state.support, [j]) == 0.0


def test_free_block_has_infinite_gain():
	scheme = GraphCoding.line(6, node_cost=0.0, component_cost=0.0)
	X = _orthonormal(10, 6)
	state = initial_state(X, np.ones(10))
	state.support = np.array([0, 1])
	# with zero costs only |F| grows, so the increment is just the novel count
	assert complexity_increment(scheme, state.support, [1, 2]) == pytest.approx(1.0)
	# on a path of 16 nodes bridging two runs costs nothing
	bridge = GraphCoding.line(16)
	X16 = _orthonormal(20, 16)
	gap = initial_state(X16, np.ones(20))
	gap.support = np.array([0, 2])
	assert complexity_increment(bridge, gap.support, [1]) == 0.0
	assert math.isinf(gain_phi(X16, np.ones(20), gap, [1], bridge))


@pytest.mark.parametrize("seed", range(20))
def test_singleton_correlation_mode_matches_omp(seed):
	rng = np.random.default_rng(seed)
	X = rng.standard_normal((30, 40))
	y = rng.standard_normal(30)
	cfg = GreedyConfig(budget=1e6, gain_mode="correlation", max_iterations=10)
	path = struct_omp(X, y, singleton_blocks(40), StandardCoding(40), cfg)
	reference = omp(X, y, 10)
	assert len(path) == len(reference) == 11
	assert path[-1].stop_reason == "max_iterations"
	for state, point in zip(path, reference):
		assert state.support.tolist() == support_of(point.coef).tolist()
		assert state.residual_norm == pytest.approx(point.residual_norm, rel=1e-8, abs=1e-10)


def test_tracked_accounting_and_monotone_path():
	rng = np.random.default_rng(5)
	X = rng.standard_normal((40, 64)) / math.sqrt(40)
	beta = np.zeros(64)
	beta[10:14] = 1.0
	beta[40:43] = -1.0
	y = X @ beta + 0.01 * rng.standard_normal(40)
	blocks = line_connected_blocks(64, 4)
	scheme = BlockInducedCoding(blocks, "tracked")
	path = struct_omp(X, y, blocks, scheme, GreedyConfig(budget=200.0, max_iterations=6))
	total = 0.0
	for prev, state in zip(path, path[1:]):
		total += blocks[state.block_id].base_length + 1.0 + (state.support.size - prev.support.size)
		assert state.complexity == pytest.approx(total)
		assert state.complexity >= prev.complexity
		assert state.residual_norm <= prev.residual_norm + 1e-10


def test_budget_limits_path():
	rng = np.random.default_rng(6)
	X = rng.standard_normal((30, 32))
	y = rng.standard_normal(30)
	scheme = GraphCoding.line(32)
	path = struct_omp(X, y, line_connected_blocks(32, 3), scheme, GreedyConfig(budget=30.0))
	assert path[-1].stop_reason == "budget"
	assert not path[-1].within_budget
	assert all(s.within_budget for s in path[:-1])
	chosen = last_within_budget(path)
	assert chosen is path[-2]
	assert chosen.complexity <= 30.0


def test_budget_too_small_and_zero_signal():
	X = _orthonormal(10, 8)
	scheme = StandardCoding(8)
	path = struct_omp(X, np.ones(10), singleton_blocks(8), scheme, GreedyConfig(budget=1.0))
	assert len(path) == 1 and path[0].stop_reason == "budget_too_small"
	path = struct_omp(X, np.zeros(10), singleton_blocks(8), scheme, GreedyConfig(budget=100.0))
	assert len(path) == 1 and path[0].stop_reason == "zero_signal"
	assert last_within_budget(path) is path[0]


def test_stall_tolerance_stops_early():
	rng = np.random.default_rng(7)
	X = rng.standard_normal((30, 20))
	y = X[:, 3] * 5.0 + 1e-3 * rng.standard_normal(30)
	cfg = GreedyConfig(budget=1e4, tolerance=1.0)
	path = struct_omp(X, y, singleton_blocks(20), StandardCoding(20), cfg)
	assert path[1].support.tolist() == [3]
	assert path[-1].stop_reason == "stalled"
	assert len(path) == 3


def test_invalid_inputs():
	X = _orthonormal(10, 4)
	blocks = BlockSet([Block((0,), math.inf), Block((1,), math.inf), Block((2,), math.inf), Block((3,), math.inf)], 4)
	with pytest.raises(GreedyError):
		struct_omp(X, np.ones(10), blocks, GraphCoding.line(4), GreedyConfig(budget=10.0))
	with pytest.raises(DimensionError):
		struct_omp(X, np.ones(10), singleton_blocks(5), StandardCoding(5), GreedyConfig(budget=10.0))
	with pytest.raises(GreedyError):
		GreedyConfig(budget=10.0, gain_mode="magic").validate()
	with pytest.raises(GreedyError):
		GreedyConfig(budget=0.0).validate()


def test_trace_rows():
	X = _orthonormal(12, 8)
	path = struct_omp(X, X[:, 2] + X[:, 6], singleton_blocks(8), StandardCoding(8), GreedyConfig(budget=50.0))
	rows = trace_rows(path)
	assert len(rows) == len(path)
	assert rows[0]["block_id"] == "" and rows[0]["k"] == 0
	assert {rows[1]["block_id"], rows[2]["block_id"]} == {2, 6}
