from __future__ import annotations

from typing import Iterable, Union

import numpy as np
from scipy import linalg as sla


# |R_ii| below this fraction of max |R_ii| counts as singular
SINGULAR_RTOL = 1e-12

SupportLike = Union[Iterable[int], np.ndarray]


class DimensionError(ValueError):
	pass


def as_design(X) -> np.ndarray:
	arr = np.asarray(X, dtype=np.float64)
	if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
		raise DimensionError(f"Design matrix must be 2-D and non-empty, got shape {arr.shape}")
	if not np.all(np.isfinite(arr)):
		raise DimensionError("Design matrix has non-finite entries")
	return arr


def as_observation(X: np.ndarray, y) -> np.ndarray:
	vec = np.asarray(y, dtype=np.float64).ravel()
	if vec.shape[0] != X.shape[0]:
		raise DimensionError(f"Observation length {vec.shape[0]} does not match n={X.shape[0]}")
	if not np.all(np.isfinite(vec)):
		raise DimensionError("Observation vector has non-finite entries")
	return vec


def as_support(F: SupportLike, p: int) -> np.ndarray:
	"""Sorted, duplicate-free int64 index array checked against [0, p)."""
	idx = np.unique(np.asarray(list(F) if not isinstance(F, np.ndarray) else F, dtype=np.int64).ravel())
	if idx.size and (idx[0] < 0 or idx[-1] >= p):
		raise DimensionError(f"Support indices must lie in [0, {p}), got range [{idx[0]}, {idx[-1]}]")
	return idx


def support_of(beta: np.ndarray, tol: float = 0.0) -> np.ndarray:
	return np.flatnonzero(np.abs(np.asarray(beta)) > tol).astype(np.int64)


def residual_norm(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
	return float(np.linalg.norm(X @ beta - y))


def restricted_least_squares(X, y, F: SupportLike) -> np.ndarray:
	"""Least squares restricted to the columns in F.

	Uses a QR solve when X_F has full column rank and the SVD-based minimum-norm
	solution otherwise. Coordinates outside F are exactly zero.
	"""
	X = as_design(X)
	y = as_observation(X, y)
	idx = as_support(F, X.shape[1])
	beta = np.zeros(X.shape[1])
	if idx.size == 0:
		return beta

	XF = X[:, idx]
	coef = None
	if idx.size <= XF.shape[0]:
		Q, R = sla.qr(XF, mode="economic")
		diag = np.abs(np.diag(R))
		if diag.min() > SINGULAR_RTOL * max(diag.max(), np.finfo(float).tiny):
			coef = sla.solve_triangular(R, Q.T @ y)
	if coef is None:
		coef = sla.lstsq(XF, y, cond=SINGULAR_RTOL)[0]
	beta[idx] = coef
	return beta


def _orthonormal_basis(XS: np.ndarray) -> np.ndarray:
	if XS.shape[1] <= XS.shape[0]:
		Q, R = np.linalg.qr(XS)
		diag = np.abs(np.diag(R))
		if diag.size and diag.min() > SINGULAR_RTOL * max(diag.max(), np.finfo(float).tiny):
			return Q
	return sla.orth(XS, rcond=SINGULAR_RTOL)


def projection_gain(X: np.ndarray, r: np.ndarray, S: SupportLike) -> float:
	"""||P_S r||^2, the squared norm of r projected onto span(X_S)."""
	idx = np.asarray(S, dtype=np.int64).ravel()
	if idx.size == 0:
		return 0.0
	if r.shape[0] != X.shape[0]:
		raise DimensionError(f"Residual length {r.shape[0]} does not match n={X.shape[0]}")
	Q = _orthonormal_basis(X[:, idx])
	if Q.shape[1] == 0:
		return 0.0
	gain = float(np.sum((Q.T @ r) ** 2))
	return min(max(gain, 0.0), float(r @ r))


def correlation_gain(X: np.ndarray, r: np.ndarray, S: SupportLike) -> float:
	"""||X_S^T r||^2."""
	idx = np.asarray(S, dtype=np.int64).ravel()
	if idx.size == 0:
		return 0.0
	if r.shape[0] != X.shape[0]:
		raise DimensionError(f"Residual length {r.shape[0]} does not match n={X.shape[0]}")
	return float(np.sum((X[:, idx].T @ r) ** 2))
