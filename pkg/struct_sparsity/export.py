from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence
import csv
import json
import math

import numpy as np

from .utils import ensure_dir


SCHEMA_VERSION = "v1"


def _fmt(value: Any) -> str:
	if isinstance(value, (bool, np.bool_)):
		return str(int(value))
	if isinstance(value, (float, np.floating)):
		v = float(value)
		if math.isnan(v):
			return "nan"
		if math.isinf(v):
			return "inf" if v > 0 else "-inf"
		return f"{v:.10g}"
	return str(value)


def write_rows_csv(path: Path, schema: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
	"""CSV with a leading `# schema=<name>/v1` line; missing cells are left empty."""
	ensure_dir(path.parent)
	with path.open("w", encoding="utf-8", newline="") as fh:
		fh.write(f"# schema={schema}/{SCHEMA_VERSION}\n")
		writer = csv.writer(fh, lineterminator="\n")
		writer.writerow(columns)
		for row in rows:
			writer.writerow([_fmt(row[c]) if row.get(c) is not None else "" for c in columns])
	return path


def read_rows_csv(path: Path) -> List[Dict[str, str]]:
	with path.open("r", encoding="utf-8", newline="") as fh:
		lines = [line for line in fh if not line.startswith("#")]
	return list(csv.DictReader(lines))


def read_schema(path: Path) -> Optional[str]:
	with path.open("r", encoding="utf-8") as fh:
		first = fh.readline().strip()
	if first.startswith("# schema="):
		return first[len("# schema=") :]
	return None


# ---------------------------------------------------------------------------
# solver traces and reports

TRACE_COLUMNS = ["k", "block_id", "gain", "residual_norm", "complexity"]
PATH_COLUMNS = ["param", "nnz", "residual_norm", "converged", "recovery_error"]
RIP_COLUMNS = ["trial", "seed", "rho_minus", "rho_plus", "passed", "rho_minus_cardinality"]
CHECK_COLUMNS = ["name", "passed", "detail"]


def write_trace_csv(path: Path, rows: Iterable[Dict[str, Any]]) -> Path:
	"""One row per StructOMP iteration, k = 0 being the empty start."""
	return write_rows_csv(path, "structomp-trace", TRACE_COLUMNS, rows)


def write_path_csv(path: Path, rows: Iterable[Dict[str, Any]]) -> Path:
	return write_rows_csv(path, "baseline-path", PATH_COLUMNS, rows)


def write_rip_csv(path: Path, rows: Iterable[Dict[str, Any]]) -> Path:
	return write_rows_csv(path, "rip-report", RIP_COLUMNS, rows)


def write_checks_csv(path: Path, rows: Iterable[Dict[str, Any]]) -> Path:
	return write_rows_csv(path, "checks", CHECK_COLUMNS, rows)


# ---------------------------------------------------------------------------
# dense arrays

def write_matrix_csv(path: Path, matrix: np.ndarray, schema: str = "matrix") -> Path:
	arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
	ensure_dir(path.parent)
	with path.open("w", encoding="utf-8", newline="") as fh:
		fh.write(f"# schema={schema}/{SCHEMA_VERSION}\n")
		for row in arr:
			fh.write(",".join(_fmt(v) for v in row) + "\n")
	return path


def write_vector_csv(path: Path, vector: np.ndarray, schema: str = "vector") -> Path:
	return write_matrix_csv(path, np.asarray(vector, dtype=np.float64).reshape(-1, 1), schema)


def read_matrix_csv(path: Path) -> np.ndarray:
	return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", dtype=np.float64, ndmin=2))


# ---------------------------------------------------------------------------
# images

def write_pgm(path: Path, image: np.ndarray, maxval: int = 255) -> Path:
	"""Plain (P2) 8-bit grayscale, linearly rescaled from [min, max] to [0, maxval]."""
	img = np.asarray(image, dtype=np.float64)
	if img.ndim != 2:
		raise ValueError(f"PGM needs a 2-D image, got shape {img.shape}")
	lo, hi = float(img.min()), float(img.max())
	scaled = np.zeros(img.shape, dtype=np.int64) if hi == lo else np.rint((img - lo) / (hi - lo) * maxval).astype(np.int64)
	h, w = img.shape
	ensure_dir(path.parent)
	with path.open("w", encoding="ascii", newline="\n") as fh:
		fh.write(f"P2\n{w} {h}\n{maxval}\n")
		for row in scaled:
			fh.write(" ".join(str(int(v)) for v in row) + "\n")
	return path


def read_pgm(path: Path) -> np.ndarray:
	tokens: List[str] = []
	for line in path.read_text(encoding="ascii").splitlines():
		tokens.extend(line.split("#", 1)[0].split())
	if not tokens or tokens[0] != "P2":
		raise ValueError(f"{path} is not a plain PGM (P2) file")
	w, h, _maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
	values = np.asarray(tokens[4 : 4 + w * h], dtype=np.float64)
	if values.size != w * h:
		raise ValueError(f"{path}: expected {w * h} pixels, found {values.size}")
	return values.reshape(h, w)


# ---------------------------------------------------------------------------
# manifest

def write_manifest(path: Path, manifest: Dict[str, Any]) -> Path:
	ensure_dir(path.parent)
	path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
	return path


def read_manifest(path: Path) -> Dict[str, Any]:
	return json.loads(path.read_text(encoding="utf-8"))
