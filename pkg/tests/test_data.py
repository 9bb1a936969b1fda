import gzip
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmfw import data
from dmfw.data import COVTYPE_LABELS, DataFormatError, parse_libsvm, partition_even, subsample, write_libsvm


def parse_text(text, **kw):
    return parse_libsvm(io.StringIO(text), **kw)


def test_single_line():
    ds = parse_text("+1 3:0.5\n")
    assert len(ds) == 1 and ds.dim == 3
    assert ds.row(0) == ({3: 0.5}, 1.0)


def test_covtype_mapping():
    ds = parse_text("2 1:1\n1 2:4\n", label_map=COVTYPE_LABELS)
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0])


def test_empty_input():
    ds = parse_text("")
    assert len(ds) == 0 and ds.dim == 0


def test_whitespace_and_blank_lines():
    ds = parse_text("\n-1 1:2  4:1.5   \n\n+1\n")
    assert len(ds) == 2 and ds.dim == 4
    assert ds.row(1) == ({}, 1.0)


@pytest.mark.parametrize("bad, line", [("1 2:x\n", 1), ("1 1:1\n1 3\n", 2), ("1 3:1 2:1\n", 1),
                                       ("1 2:1 2:3\n", 1), ("lbl 1:1\n", 1), ("1 0:1\n", 1)])
def test_malformed_lines(bad, line):
    with pytest.raises(DataFormatError, match=f"line {line}"):
        parse_text(bad)


def test_dimension_override():
    assert parse_text("1 2:1\n", dim=10).dim == 10
    with pytest.raises(DataFormatError):
        parse_text("1 12:1\n", dim=10)


def test_gzip_file(tmp_path):
    path = tmp_path / "d.svm.gz"
    with gzip.open(path, "wt") as fh:
        fh.write("1 1:0.5 7:2\n-1 2:1\n")
    ds = parse_libsvm(path)
    assert len(ds) == 2 and ds.dim == 7


rows = st.lists(
    st.tuples(
        st.sampled_from([-1.0, 1.0, 2.0, 0.5]),
        st.dictionaries(st.integers(1, 50), st.floats(-1e6, 1e6, allow_nan=False), max_size=8),
    ),
    max_size=20,
)


@given(rows)
@settings(max_examples=100)
def test_round_trip(records):
    text = "".join(
        f"{lab!r} " + " ".join(f"{i}:{v!r}" for i, v in sorted(feat.items())) + "\n" for lab, feat in records
    )
    ds = parse_text(text)
    buf = io.StringIO()
    write_libsvm(ds, buf)
    again = parse_text(buf.getvalue(), dim=ds.dim)
    assert again == ds


def test_round_trip_file(tmp_path):
    ds = data.synthetic_a9a(50, seed=1)
    write_libsvm(ds, tmp_path / "x.svm")
    assert parse_libsvm(tmp_path / "x.svm", dim=123) == ds


def test_partition_examples():
    parts = partition_even(10, 5)
    assert [p.size for p in parts] == [2] * 5
    parts = partition_even(11, 5)
    assert [p.size for p in parts] == [3, 2, 2, 2, 2]
    np.testing.assert_array_equal(np.concatenate(parts), np.arange(11))
    with pytest.raises(ValueError):
        partition_even(3, 4)


@pytest.mark.parametrize("m", range(1, 40))
@pytest.mark.parametrize("n", [1, 2, 3, 7])
@pytest.mark.parametrize("shuffle", [False, True])
def test_partition_disjoint_covering(m, n, shuffle):
    if n > m:
        return
    parts = partition_even(m, n, seed=3, shuffle=shuffle)
    sizes = [p.size for p in parts]
    assert max(sizes) - min(sizes) <= 1
    flat = np.concatenate(parts)
    assert sorted(flat.tolist()) == list(range(m))
    if not shuffle:
        np.testing.assert_array_equal(flat, np.arange(m))


def test_subsample():
    ds = data.synthetic_a9a(100, seed=0)
    assert subsample(ds, 100) is ds
    sub = subsample(ds, 30, seed=5)
    assert len(sub) == 30
    assert sub == subsample(ds, 30, seed=5)
    with pytest.raises(ValueError):
        subsample(ds, 0)


def test_take_and_csr():
    ds = parse_text("1 1:1 3:2\n-1 2:5\n1 3:7\n")
    sub = ds.take([2, 0])
    np.testing.assert_array_equal(sub.to_csr().toarray(), [[0, 0, 7], [1, 0, 2]])
    np.testing.assert_array_equal(sub.labels, [1, 1])


def test_sign_labels_and_scaling():
    ds = parse_text("1 1:2\n2 1:-4 2:1\n")
    np.testing.assert_array_equal(ds.sign_labels().labels, [-1, 1])
    np.testing.assert_array_equal(ds.maxabs_scaled().to_csr().toarray(), [[0.5, 0], [-1, 1]])


def test_synthetic_a9a_shape():
    ds = data.synthetic_a9a(500, seed=0)
    assert ds.dim == 123 and len(ds) == 500
    assert set(np.unique(ds.labels)) == {-1.0, 1.0}
    assert np.all(np.diff(ds.indptr) == 14)
    assert 0.1 < (ds.labels > 0).mean() < 0.45
    assert ds == data.synthetic_a9a(500, seed=0)
