"""Synthetic designs, sparse signals and noise."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple
import math

import numpy as np
from scipy import ndimage
from skimage.measure import label

from .config import NoiseConfig, SignalSpec
from .logger import get_logger
from .utils import make_rng
from .wavelet import full_levels, haar2_forward


logger = get_logger()

MAX_ATTEMPTS = 100
# piecewise images must keep this share of energy in the top 10% of Haar coefficients
PIECEWISE_ENERGY = 0.95

_CROSS = ndimage.generate_binary_structure(2, 1)


class SignalError(ValueError):
	pass


@dataclass
class SignalSample:
	spec: SignalSpec
	coefficients: np.ndarray  # ground truth in the recovery basis
	geometry: Dict[str, Any]
	k: int  # support size, or k_eff for compressible signals
	image: Optional[np.ndarray] = None
	reference_support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


# ---------------------------------------------------------------------------
# designs

def gen_design_gaussian(n: int, p: int, seed: int) -> np.ndarray:
	"""iid N(0, 1) entries with every row rescaled to unit Euclidean norm."""
	if n < 1 or p < 1:
		raise SignalError(f"Design needs n, p >= 1, got n={n}, p={p}")
	X = make_rng(seed).standard_normal((n, p))
	norms = np.linalg.norm(X, axis=1, keepdims=True)
	return X / np.where(norms > 0, norms, 1.0)


def gen_design_rip(n: int, p: int, seed: int) -> np.ndarray:
	"""iid N(0, 1) entries, the scaling used with the X^T X / n eigenvalue checks."""
	if n < 1 or p < 1:
		raise SignalError(f"Design needs n, p >= 1, got n={n}, p={p}")
	return make_rng(seed).standard_normal((n, p))


# ---------------------------------------------------------------------------
# 1-D signals

def gen_1d_strong(p: int, k: int, g: int, seed: int) -> np.ndarray:
	"""k nonzeros of value +-1 in g maximal runs with at least one zero between runs.

	Run lengths are a uniform composition of k into g positive parts; the free
	zeros are spread uniformly over the g + 1 gaps.
	"""
	if g < 1 or k < g or k > p:
		raise SignalError(f"Need 1 <= g <= k <= p, got g={g}, k={k}, p={p}")
	free = p - k - (g - 1)
	if free < 0:
		raise SignalError(f"Cannot place {g} separated runs totalling {k} in p={p}")
	rng = make_rng(seed)
	cuts = np.sort(rng.choice(np.arange(1, k), size=g - 1, replace=False)) if g > 1 else np.zeros(0, dtype=int)
	lengths = np.diff(np.concatenate(([0], cuts, [k])))
	bars = np.sort(rng.choice(free + g, size=g, replace=False))
	gaps = np.diff(np.concatenate(([-1], bars))) - 1

	beta = np.zeros(p)
	pos = int(gaps[0])
	for i, length in enumerate(lengths):
		beta[pos : pos + length] = rng.choice([-1.0, 1.0], size=length)
		pos += int(length) + 1 + (int(gaps[i + 1]) if i + 1 < g else 0)
	return beta


def count_runs(beta: np.ndarray) -> int:
	nz = (np.asarray(beta) != 0).astype(np.int8)
	return int(np.sum(np.diff(np.concatenate(([0], nz))) == 1))


def effective_sparsity(beta: np.ndarray, energy: float = 0.95) -> int:
	"""Smallest K whose K largest |beta_j| hold `energy` of ||beta||^2."""
	e = np.sort(np.asarray(beta, dtype=np.float64) ** 2)[::-1]
	total = e.sum()
	if total == 0:
		return 0
	return int(np.searchsorted(np.cumsum(e), energy * total, side="left")) + 1


def effective_support(beta: np.ndarray, energy: float = 0.95) -> np.ndarray:
	k = effective_sparsity(beta, energy)
	order = np.argsort(-np.abs(beta), kind="stable")
	return np.sort(order[:k]).astype(np.int64)


def gen_1d_weak(
	p: int,
	g: int,
	decay_exponent: float = 1.0,
	seed: int = 0,
	width: float = 0.6,
	energy: float = 0.95,
) -> Tuple[np.ndarray, int]:
	"""Dense compressible signal: g centres, magnitudes (1 + d / width)^-decay_exponent
	with d the distance to the nearest centre, random signs. Returns (beta, k_eff).
	"""
	if g < 1 or g > p:
		raise SignalError(f"Need 1 <= g <= p, got g={g}, p={p}")
	rng = make_rng(seed)
	min_gap = p / (2.0 * g)
	for _ in range(MAX_ATTEMPTS):
		centres = np.sort(rng.choice(p, size=g, replace=False))
		if g == 1 or np.diff(centres).min() >= min_gap:
			break
	else:
		raise SignalError(f"Could not place {g} centres {min_gap:.1f} apart in p={p}")
	d = np.min(np.abs(np.arange(p)[:, None] - centres[None, :]), axis=1)
	mag = (1.0 + d / width) ** (-decay_exponent)
	beta = mag * rng.choice([-1.0, 1.0], size=p)
	return beta, effective_sparsity(beta, energy)


# ---------------------------------------------------------------------------
# 2-D signals

def _grow_blob(rng: np.random.Generator, blocked: np.ndarray, size: int) -> Optional[np.ndarray]:
	free = np.argwhere(~blocked)
	if free.size == 0:
		return None
	blob = np.zeros_like(blocked)
	r, c = free[rng.integers(len(free))]
	blob[r, c] = True
	for _ in range(size - 1):
		frontier = np.argwhere(ndimage.binary_dilation(blob, _CROSS) & ~blob & ~blocked)
		if frontier.size == 0:
			return None
		r, c = frontier[rng.integers(len(frontier))]
		blob[r, c] = True
	return blob


def gen_2d_blobs(h: int, w: int, g: int, blob_size: int, seed: int) -> np.ndarray:
	"""g 4-connected, mutually non-adjacent blobs of blob_size pixels, flattened row-major.

	Each blob carries one random sign and magnitudes uniform on [0.5, 1.5].
	"""
	if g < 1 or blob_size < 1 or g * blob_size > h * w:
		raise SignalError(f"Cannot place {g} blobs of {blob_size} pixels in {h}x{w}")
	rng = make_rng(seed)
	for attempt in range(MAX_ATTEMPTS):
		occupied = np.zeros((h, w), dtype=bool)
		image = np.zeros((h, w))
		ok = True
		for _ in range(g):
			blocked = ndimage.binary_dilation(occupied, _CROSS) if occupied.any() else occupied
			blob = _grow_blob(rng, blocked, blob_size)
			if blob is None:
				ok = False
				break
			occupied |= blob
			sign = rng.choice([-1.0, 1.0])
			image[blob] = sign * rng.uniform(0.5, 1.5, size=int(blob.sum()))
		if ok and label(occupied, connectivity=1).max() == g:
			return image.ravel()
		logger.debug(f"Blob placement attempt {attempt + 1} failed, retrying")
	raise SignalError(f"Could not place {g} separated blobs in {h}x{w} after {MAX_ATTEMPTS} attempts")


def top_energy_share(coefficients: np.ndarray, fraction: float = 0.1) -> float:
	e = np.sort(np.asarray(coefficients, dtype=np.float64).ravel() ** 2)[::-1]
	total = e.sum()
	if total == 0:
		return 1.0
	top = max(1, int(math.ceil(fraction * e.size)))
	return float(e[:top].sum() / total)


def gen_2d_piecewise(
	h: int,
	w: int,
	seed: int,
	regions: int = 4,
	smooth: bool = True,
	levels: Optional[int] = None,
) -> np.ndarray:
	"""Piecewise-constant (optionally plus a gentle gradient) image whose Haar
	transform keeps at least 95% of its energy in the top 10% of coefficients.
	"""
	rng = make_rng(seed)
	yy, xx = np.mgrid[0:h, 0:w]
	for attempt in range(MAX_ATTEMPTS):
		image = np.ones((h, w))
		for _ in range(regions):
			r0, r1 = np.sort(rng.choice(h + 1, size=2, replace=False))
			c0, c1 = np.sort(rng.choice(w + 1, size=2, replace=False))
			image[r0:r1, c0:c1] += rng.uniform(-1.0, 1.0)
		if smooth:
			a, b = rng.uniform(-0.5, 0.5, size=2)
			image += a * xx / w + b * yy / h
		share = top_energy_share(haar2_forward(image, levels).coefficients)
		if share >= PIECEWISE_ENERGY:
			return image
		logger.debug(f"Piecewise attempt {attempt + 1}: top-10% energy {share:.3f}, retrying")
	raise SignalError(f"No compressible {h}x{w} image after {MAX_ATTEMPTS} attempts")


# ---------------------------------------------------------------------------
# noise and errors

def add_noise(clean: np.ndarray, noise: NoiseConfig) -> np.ndarray:
	clean = np.asarray(clean, dtype=np.float64)
	if noise.sigma == 0:
		return clean.copy()
	return clean + noise.sigma * make_rng(noise.seed).standard_normal(clean.shape)


def recovery_error(estimate: np.ndarray, truth: np.ndarray) -> float:
	truth = np.asarray(truth, dtype=np.float64)
	estimate = np.asarray(estimate, dtype=np.float64)
	if estimate.shape != truth.shape:
		raise SignalError(f"Shape mismatch: estimate {estimate.shape} vs truth {truth.shape}")
	denom = np.linalg.norm(truth)
	if denom == 0:
		raise SignalError("Recovery error is undefined for a zero ground truth")
	return float(np.linalg.norm(estimate - truth) / denom)


# ---------------------------------------------------------------------------

def generate_signal(spec: SignalSpec, energy: float = 0.95) -> SignalSample:
	spec.validate()
	if spec.kind == "strong-1d":
		beta = gen_1d_strong(spec.p, spec.k, spec.g, spec.seed)
		supp = np.flatnonzero(beta)
		return SignalSample(spec, beta, {"kind": "line", "p": spec.p}, int(supp.size), reference_support=supp)
	if spec.kind == "weak-1d":
		beta, k_eff = gen_1d_weak(spec.p, spec.g, spec.decay_exponent, spec.seed, spec.decay_width, energy)
		return SignalSample(
			spec, beta, {"kind": "line", "p": spec.p}, k_eff, reference_support=effective_support(beta, energy)
		)
	h, w = int(spec.h), int(spec.w)
	if spec.kind == "blobs-2d":
		beta = gen_2d_blobs(h, w, spec.g, spec.blob_size, spec.seed)
		supp = np.flatnonzero(beta)
		return SignalSample(
			spec,
			beta,
			{"kind": "grid", "h": h, "w": w, "p": h * w},
			int(supp.size),
			image=beta.reshape(h, w),
			reference_support=supp,
		)
	levels = full_levels(h, w) if spec.levels is None else int(spec.levels)
	image = gen_2d_piecewise(h, w, spec.seed, spec.regions, spec.smooth, levels)
	coef = haar2_forward(image, levels).coefficients.ravel()
	return SignalSample(
		spec,
		coef,
		{"kind": "wavelet", "h": h, "w": w, "levels": levels, "p": h * w},
		effective_sparsity(coef, energy),
		image=image,
		reference_support=effective_support(coef, energy),
	)
