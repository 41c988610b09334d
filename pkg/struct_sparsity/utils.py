from __future__ import annotations

from pathlib import Path
import hashlib

import numpy as np


def ensure_dir(path: Path) -> None:
	path.mkdir(parents=True, exist_ok=True)


def derive_seed(master: int, *purpose: object) -> int:
	"""Stable 63-bit stream seed for (master, purpose...).

	Streams for different purposes are independent; the same tuple always maps
	to the same seed on every platform.
	"""
	key = "/".join([str(int(master))] + [str(p) for p in purpose])
	digest = hashlib.sha1(key.encode("utf-8")).digest()
	return int.from_bytes(digest[:8], "big") >> 1


def make_rng(seed: int, *purpose: object) -> np.random.Generator:
	if purpose:
		seed = derive_seed(seed, *purpose)
	return np.random.Generator(np.random.PCG64(int(seed)))
