import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dssn.data import Dataset, DatasetError, dataset_csv, load_dataset, save_dataset, synth_dataset


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_column_file(tmp_path):
    ds = load_dataset(write(tmp_path, "a,b,label\n0,4,0\n2,3,1\n4,0,1\n"), q=4)
    assert ds.d == 2 and len(ds) == 3 and ds.num_classes == 2
    assert ds.point(1).levels == (2, 3)


@pytest.mark.parametrize("text, line", [
    ("a,b,label\n0,4,0\n5,1,1\n", 3),
    ("a,b,label\n0,4,0\n1,1\n", 3),
    ("a,b,label\n0,x,0\n", 2),
    ("a,b,label\n0,1,0\n1,1,-1\n", 3),
])
def test_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(DatasetError) as err:
        load_dataset(write(tmp_path, text), q=4)
    assert err.value.line == line and f"line {line}" in str(err.value)


def test_unknown_label_against_declared_classes(tmp_path):
    with pytest.raises(DatasetError, match="line 3: unknown label 2"):
        load_dataset(write(tmp_path, "a,label\n0,0\n1,2\n"), q=4, num_classes=2)


@pytest.mark.parametrize("text", ["", "a,label\n"])
def test_empty_file_is_an_error(tmp_path, text):
    with pytest.raises(DatasetError):
        load_dataset(write(tmp_path, text), q=4)


def test_csv_round_trip(tmp_path):
    ds = synth_dataset(1, 3, 8, 3, 10, 1.0)
    save_dataset(ds, tmp_path / "s.csv")
    back = load_dataset(tmp_path / "s.csv", q=8, num_classes=3)
    assert np.array_equal(back.levels, ds.levels) and np.array_equal(back.labels, ds.labels)
    assert dataset_csv(back) == dataset_csv(ds)


def test_synth_deterministic():
    a, b = synth_dataset(5, 4, 16, 3, 20, 1.0), synth_dataset(5, 4, 16, 3, 20, 1.0)
    assert dataset_csv(a) == dataset_csv(b) and a.provenance == b.provenance


def test_zero_separation_identical_classes():
    ds = synth_dataset(2, 2, 255, 2, 20_000, 0.0)
    a, b = ds.levels[ds.labels == 0], ds.levels[ds.labels == 1]
    # same centre for every class: means agree to sampling error
    se = ds.levels.std(axis=0) * np.sqrt(2 / 20_000)
    assert np.all(np.abs(a.mean(axis=0) - b.mean(axis=0)) <= 5 * se)


@given(st.integers(0, 1000), st.integers(1, 5), st.integers(1, 32), st.integers(1, 4), st.integers(1, 15),
       st.floats(0, 3))
@settings(max_examples=40, deadline=None)
def test_synth_invariants(seed, d, q, k, n, sep):
    ds = synth_dataset(seed, d, q, k, n, sep)
    assert ds.levels.shape == (k * n, d) and ds.levels.min() >= 0 and ds.levels.max() <= q
    assert set(ds.labels) == set(range(k))


def test_dataset_validation():
    with pytest.raises(DatasetError):
        Dataset(np.array([[0, 5]]), np.array([0]), q=4, num_classes=1)
    with pytest.raises(DatasetError):
        Dataset(np.array([[0, 1]]), np.array([3]), q=4, num_classes=2)
    with pytest.raises(ValueError):
        synth_dataset(0, 0, 4, 2, 2, 1.0)
