from pathlib import Path

import numpy as np

from struct_sparsity.export import (
	read_manifest,
	read_matrix_csv,
	read_pgm,
	read_rows_csv,
	read_schema,
	write_manifest,
	write_matrix_csv,
	write_pgm,
	write_rows_csv,
	write_vector_csv,
)


def test_rows_csv_schema_and_formatting(tmp_path: Path):
	path = write_rows_csv(
		tmp_path / "sub" / "rows.csv",
		"trials",
		["a", "b", "c"],
		[{"a": 1, "b": float("nan"), "c": None}, {"a": True, "b": 1 / 3, "c": float("inf")}],
	)
	lines = path.read_text(encoding="utf-8").splitlines()
	assert lines[0] == "# schema=trials/v1"
	assert lines[1] == "a,b,c"
	assert lines[2] == "1,nan,"
	assert lines[3] == "1,0.3333333333,inf"
	assert read_schema(path) == "trials/v1"
	rows = read_rows_csv(path)
	assert rows[1]["b"] == "0.3333333333"


def test_matrix_and_vector_csv(tmp_path: Path):
	M = np.arange(6.0).reshape(2, 3) / 7
	back = read_matrix_csv(write_matrix_csv(tmp_path / "m.csv", M, "design"))
	np.testing.assert_allclose(back, M, rtol=1e-9)
	assert read_schema(tmp_path / "m.csv") == "design/v1"
	v = read_matrix_csv(write_vector_csv(tmp_path / "v.csv", np.array([1.0, -2.0, 3.5])))
	assert v.shape == (3, 1)


def test_pgm_rescales_to_8_bit(tmp_path: Path):
	image = np.array([[0.0, 0.5], [1.0, 2.0]])
	path = write_pgm(tmp_path / "img.pgm", image)
	assert path.read_text(encoding="ascii").startswith("P2\n2 2\n255\n")
	np.testing.assert_array_equal(read_pgm(path), [[0, 64], [128, 255]])
	flat = read_pgm(write_pgm(tmp_path / "flat.pgm", np.full((3, 2), 4.0)))
	assert flat.shape == (3, 2) and not flat.any()


def test_manifest_is_sorted_json(tmp_path: Path):
	path = write_manifest(tmp_path / "manifest.json", {"b": 1, "a": {"path": tmp_path}})
	text = path.read_text(encoding="utf-8")
	assert text.index('"a"') < text.index('"b"')
	assert read_manifest(path)["a"]["path"] == str(tmp_path)
