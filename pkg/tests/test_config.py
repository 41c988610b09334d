import json
from pathlib import Path

import pytest

from struct_sparsity.config import FULL_TRIALS, ConfigError, SignalSpec, build_config, load_config, with_seed


QUICK = Path(__file__).resolve().parents[1] / "experiments" / "quick.yaml"


def _write(tmp_path: Path, text: str, name: str = "exp.yaml") -> Path:
	path = tmp_path / name
	path.write_text(text, encoding="utf-8")
	return path


def test_load_config_defaults(tmp_path: Path):
	path = _write(
		tmp_path,
		"signal: {kind: strong-1d, p: 64, k: 8, g: 2}\n"
		"design: {n_values: [24, 32]}\n"
		"methods: [{kind: omp}]\n",
	)
	cfg = load_config(path)
	assert cfg.trials == 20
	assert cfg.noise.sigma == 0.01
	assert cfg.n_values() == [24, 32]
	assert [m.id for m in cfg.methods] == ["omp"]
	assert cfg.config_path == path


def test_overrides_and_full_protocol(tmp_path: Path):
	cfg = load_config(QUICK, seed=11, output=tmp_path / "o", threads=0, full=True)
	assert cfg.master_seed == 11
	assert cfg.trials == FULL_TRIALS
	assert cfg.output == tmp_path / "o"
	assert cfg.threads == 1
	assert load_config(QUICK, trials=3, full=True).trials == 3


def test_group_sizes_expand_into_methods():
	cfg = load_config(QUICK)
	assert [m.id for m in cfg.methods] == ["structomp", "omp", "lasso", "group-lasso-gs4"]


def test_ratios_use_nominal_k():
	cfg = build_config(
		{
			"signal": {"kind": "blobs-2d", "h": 16, "w": 16, "g": 2, "blob_size": 8},
			"design": {"ratios": [2, 3.5]},
			"methods": [{"kind": "omp"}],
		}
	).validate()
	assert cfg.signal.p == 256
	assert cfg.n_values() == [32, 56]


def test_json_config(tmp_path: Path):
	data = {"signal": {"kind": "weak-1d", "p": 128, "g": 2}, "design": {"n_values": [40]}, "methods": [{"kind": "lasso"}]}
	cfg = load_config(_write(tmp_path, json.dumps(data), "exp.json"))
	assert cfg.signal.kind == "weak-1d"


@pytest.mark.parametrize(
	"text",
	[
		"signal: {kind: square}\ndesign: {n_values: [8]}\nmethods: [{kind: omp}]\n",
		"signal: {p: 64, k: 8, g: 2}\ndesign: {n_values: [128]}\nmethods: [{kind: omp}]\n",
		"signal: {p: 64, k: 8, g: 2, colour: red}\ndesign: {n_values: [8]}\nmethods: [{kind: omp}]\n",
		"signal: {p: 64, k: 8, g: 2}\ndesign: {n_values: [8]}\nmethods: [{kind: group-lasso}]\n",
		"signal: {p: 64, k: 8, g: 2}\ndesign: {n_values: [8]}\nmethods: [{kind: omp}, {kind: omp}]\n",
		"signal: {p: 64, k: 8, g: 2}\ndesign: {n_values: [8]}\nmethods: []\n",
		"signal: {p: 64, k: 8, g: 2}\ndesign: {n_values: [8]}\nnoise: {sigma: -1}\nmethods: [{kind: omp}]\n",
		"signal: {p: 64, k: 8, g: 2}\ndesign: {n_values: [8]}\nmethods: [{kind: omp, selection: last-within-budget}]\n",
	],
)
def test_invalid_configs_raise(tmp_path: Path, text: str):
	with pytest.raises(ConfigError):
		load_config(_write(tmp_path, text))


def test_missing_and_unsupported_files(tmp_path: Path):
	with pytest.raises(ConfigError):
		load_config(tmp_path / "nope.yaml")
	with pytest.raises(ConfigError):
		load_config(_write(tmp_path, "x = 1", "exp.toml"))


def test_with_seed_copies_spec():
	spec = SignalSpec(p=32, k=4, g=1)
	other = with_seed(spec, 9)
	assert other.seed == 9 and spec.seed == 0


def test_selection_defaults_follow_method_kind():
	cfg = load_config(QUICK)
	chosen = {m.id: m.selection for m in cfg.methods}
	assert chosen["structomp"] == "last-within-budget"
	assert chosen["omp"] == chosen["lasso"] == chosen["group-lasso-gs4"] == "min-true-error"
