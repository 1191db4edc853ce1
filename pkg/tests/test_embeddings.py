import numpy as np
import pytest

from relmargin.embeddings import EmbeddingTable, init_table, load_table, save_table
from relmargin.errors import DataFormatError, ShapeError

IDS = [f"id{k}" for k in range(100)]


def test_init_deterministic():
    assert init_table(IDS, 8, 3) == init_table(IDS, 8, 3)


def test_init_seeds_differ():
    a, b = init_table(IDS, 8, 3), init_table(IDS, 8, 4)
    assert not np.array_equal(a.vectors, b.vectors)


def test_gaussian_norms_concentrate():
    norms = np.linalg.norm(init_table(IDS, 8, 0).vectors, axis=1)
    assert np.all(norms > 0)
    # E|v|^2 = 1 for N(0, 1/D) entries
    assert abs(np.mean(norms ** 2) - 1.0) < 0.15
    assert 0.8 < np.median(norms) < 1.1


def test_sphere_scheme_unit_norm():
    norms = np.linalg.norm(init_table(IDS, 8, 0, "sphere").vectors, axis=1)
    np.testing.assert_allclose(norms, 1.0, rtol=1e-15)


@pytest.mark.parametrize("args", [([], 8, 0), (["a", "a"], 8, 0), (["a"], 1, 0)])
def test_init_errors(args):
    with pytest.raises(ValueError):
        init_table(*args)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        init_table(["a"], 4, 0, "uniform")


def test_rows_unknown_id():
    t = init_table(["a", "b"], 4, 0)
    np.testing.assert_array_equal(t.rows(["b", "a"]), [1, 0])
    with pytest.raises(DataFormatError):
        t.rows(["c"])


def test_shape_validation():
    with pytest.raises(ShapeError):
        EmbeddingTable(["a"], np.ones((2, 3)))
    with pytest.raises(ValueError):
        EmbeddingTable(["a", "a"], np.ones((2, 3)))


def test_round_trip_lossless(tmp_path):
    t = init_table(IDS[:10], 5, 42)
    t.vectors[0, 0] = 1 / 3
    save_table(t, tmp_path / "t.tsv")
    assert load_table(tmp_path / "t.tsv") == t
    assert (tmp_path / "t.tsv").read_text().splitlines()[0] == "#dim=5 seed=42"


@pytest.mark.parametrize("text", ["", "dim=2\n", "#dim=2 seed=0\na\t1.0\n", "#dim=2 seed=0\na\t1\tx\n",
                                  "#dim=2 seed=0\n"])
def test_load_errors(tmp_path, text):
    p = tmp_path / "bad.tsv"
    p.write_text(text)
    with pytest.raises(DataFormatError):
        load_table(p)


def test_load_missing(tmp_path):
    with pytest.raises(DataFormatError):
        load_table(tmp_path / "nope.tsv")
