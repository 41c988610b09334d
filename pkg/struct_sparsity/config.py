from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml


SIGNAL_KINDS = ("strong-1d", "weak-1d", "blobs-2d", "piecewise-2d")
METHOD_KINDS = ("structomp", "omp", "lasso", "group-lasso")
SELECTION_CRITERIA = ("min-true-error", "target-sparsity", "min-residual-at-sparsity", "last", "last-within-budget")
DEFAULT_TRIALS = 20
FULL_TRIALS = 100


class ConfigError(Exception):
	pass


@dataclass
class SignalSpec:
	kind: str = "strong-1d"
	p: int = 512
	h: Optional[int] = None
	w: Optional[int] = None
	k: int = 64
	g: int = 4
	# weak-1d: magnitudes (1 + d / decay_width) ** -decay_exponent around each centre
	decay_exponent: float = 1.0
	decay_width: float = 0.6
	blob_size: int = 16
	regions: int = 4  # piecewise-2d rectangles
	smooth: bool = True  # piecewise-2d gradient
	levels: Optional[int] = None  # Haar depth, full when None
	seed: int = 0

	def __post_init__(self) -> None:
		if self.h is not None and self.w is not None:
			self.p = int(self.h) * int(self.w)

	@property
	def is_2d(self) -> bool:
		return self.kind in ("blobs-2d", "piecewise-2d")

	def nominal_k(self) -> int:
		if self.kind == "blobs-2d":
			return self.g * self.blob_size
		return self.k

	def validate(self) -> "SignalSpec":
		if self.kind not in SIGNAL_KINDS:
			raise ConfigError(f"Unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
		if self.is_2d and (self.h is None or self.w is None):
			raise ConfigError(f"Signal kind {self.kind!r} needs h and w")
		if self.p < 1:
			raise ConfigError("p must be >= 1")
		if self.kind == "strong-1d" and not (1 <= self.g <= self.k <= self.p):
			raise ConfigError(f"Need 1 <= g <= k <= p, got g={self.g}, k={self.k}, p={self.p}")
		if self.kind == "weak-1d" and (self.decay_exponent <= 0 or self.decay_width <= 0):
			raise ConfigError("decay_exponent and decay_width must be positive")
		return self


@dataclass
class NoiseConfig:
	sigma: float = 0.01
	seed: int = 0

	def validate(self) -> "NoiseConfig":
		if self.sigma < 0:
			raise ConfigError(f"Noise sigma must be >= 0, got {self.sigma}")
		return self


@dataclass
class DesignSpec:
	n_values: List[int] = field(default_factory=list)
	ratios: List[float] = field(default_factory=list)  # n = round(ratio * nominal k)
	normalize_rows: bool = True


@dataclass
class MethodSpec:
	kind: str
	name: Optional[str] = None
	# structomp
	blocks: Optional[Dict[str, Any]] = None
	scheme: Optional[Dict[str, Any]] = None
	gain_mode: str = "projection"
	budget: Optional[float] = None
	budget_factor: float = 1.5
	gamma: float = 1.0
	max_iterations: int = 1000
	tolerance: float = 0.0
	# baselines
	group_size: Optional[int] = None
	k_max: Optional[int] = None
	lambda_count: int = 100
	lambda_ratio: float = 1e-4
	selection: Optional[str] = None  # structomp: last-within-budget, baselines: min-true-error
	sparsity: Optional[int] = None

	def __post_init__(self):
		if self.selection is None:
			self.selection = "last-within-budget" if self.kind == "structomp" else "min-true-error"

	@property
	def id(self) -> str:
		if self.name:
			return self.name
		if self.kind == "group-lasso" and self.group_size is not None:
			return f"group-lasso-gs{self.group_size}"
		return self.kind

	def validate(self) -> "MethodSpec":
		if self.kind not in METHOD_KINDS:
			raise ConfigError(f"Unknown method kind {self.kind!r}; expected one of {METHOD_KINDS}")
		if self.selection not in SELECTION_CRITERIA:
			raise ConfigError(f"Unknown selection {self.selection!r}")
		if self.selection == "last-within-budget" and self.kind != "structomp":
			raise ConfigError(f"{self.kind} has no complexity budget; use another selection")
		if self.kind == "structomp" and self.blocks is None:
			raise ConfigError("structomp needs a block-set descriptor")
		if self.kind == "group-lasso" and not self.group_size:
			raise ConfigError("group-lasso needs group_size (or group_sizes)")
		return self


@dataclass
class ExperimentConfig:
	name: str = "experiment"
	signal: SignalSpec = field(default_factory=SignalSpec)
	design: DesignSpec = field(default_factory=DesignSpec)
	noise: NoiseConfig = field(default_factory=NoiseConfig)
	methods: List[MethodSpec] = field(default_factory=list)
	trials: int = DEFAULT_TRIALS
	master_seed: int = 0
	output: Path = Path("./results")
	threads: int = 1
	energy: float = 0.95  # k_eff energy fraction for weak signals
	config_path: Optional[Path] = None

	def n_values(self) -> List[int]:
		if self.design.n_values:
			return [int(n) for n in self.design.n_values]
		k = self.signal.nominal_k()
		return [max(1, int(round(r * k))) for r in self.design.ratios]

	def validate(self) -> "ExperimentConfig":
		self.signal.validate()
		self.noise.validate()
		for m in self.methods:
			m.validate()
		if self.trials < 1:
			raise ConfigError("trials must be >= 1")
		if not self.methods:
			raise ConfigError("At least one method is required")
		ns = self.n_values()
		if not ns:
			raise ConfigError("design needs n_values or ratios")
		if any(n < 1 or n > self.signal.p for n in ns):
			raise ConfigError(f"Every n must lie in [1, p={self.signal.p}], got {ns}")
		ids = [m.id for m in self.methods]
		if len(set(ids)) != len(ids):
			raise ConfigError(f"Method ids must be unique, got {ids}")
		return self


def _load_config_file(path: Path) -> Dict[str, Any]:
	if not path.exists():
		raise ConfigError(f"Config file not found: {path}")
	if path.suffix.lower() in (".yml", ".yaml"):
		return yaml.safe_load(path.read_text(encoding="utf-8")) or {}
	if path.suffix.lower() == ".json":
		return json.loads(path.read_text(encoding="utf-8"))
	raise ConfigError(f"Unsupported config format: {path.suffix}")


def _only_known(cls, data: Dict[str, Any], where: str) -> Dict[str, Any]:
	known = {f.name for f in fields(cls)}
	unknown = sorted(set(data) - known)
	if unknown:
		raise ConfigError(f"Unknown {where} fields: {unknown}")
	return data


def _expand_methods(raw: List[Dict[str, Any]]) -> List[MethodSpec]:
	methods: List[MethodSpec] = []
	for item in raw:
		item = dict(item)
		sizes = item.pop("group_sizes", None)
		if sizes:
			for gs in sizes:
				methods.append(MethodSpec(**_only_known(MethodSpec, {**item, "group_size": int(gs)}, "method")))
		else:
			methods.append(MethodSpec(**_only_known(MethodSpec, item, "method")))
	return methods


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
	data = dict(data)
	try:
		signal = SignalSpec(**_only_known(SignalSpec, data.pop("signal", {}) or {}, "signal"))
		design = DesignSpec(**_only_known(DesignSpec, data.pop("design", {}) or {}, "design"))
		noise = NoiseConfig(**_only_known(NoiseConfig, data.pop("noise", {}) or {}, "noise"))
		methods = _expand_methods(data.pop("methods", []) or [])
	except TypeError as e:
		raise ConfigError(str(e)) from e
	if "output" in data:
		data["output"] = Path(data["output"])
	cfg = ExperimentConfig(
		signal=signal,
		design=design,
		noise=noise,
		methods=methods,
		**_only_known(ExperimentConfig, data, "experiment"),
	)
	return cfg


def load_config(
	path: Optional[Path] = None,
	*,
	seed: Optional[int] = None,
	trials: Optional[int] = None,
	output: Optional[Path] = None,
	threads: Optional[int] = None,
	full: bool = False,
) -> ExperimentConfig:
	data = _load_config_file(path) if path else {}
	cfg = build_config(data)
	cfg.config_path = path

	# CLI overrides
	if seed is not None:
		cfg.master_seed = int(seed)
	if full:
		cfg.trials = FULL_TRIALS
	if trials is not None:
		cfg.trials = int(trials)
	if output is not None:
		cfg.output = Path(output)
	if threads is not None:
		cfg.threads = max(1, int(threads))
	return cfg.validate()


def with_seed(spec: SignalSpec, seed: int) -> SignalSpec:
	return replace(spec, seed=int(seed))
