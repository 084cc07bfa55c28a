import numpy as np
import pytest

from fcbio.core import InvalidData
from fcbio.io import DatasetParseError, load_dataset, read_csv, read_libsvm, write_csv, write_libsvm
from fcbio.problems import DesignMatrix


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_libsvm_single_line(tmp_path):
    d = read_libsvm(write(tmp_path, "a.svm", "+1 3:0.5\n"), n_features=4)
    np.testing.assert_array_equal(d.A, [[0, 0, 0.5, 0]])
    np.testing.assert_array_equal(d.b, [1.0])


def test_csv_without_b(tmp_path):
    d = read_csv(write(tmp_path, "a.csv", "2,2\n1,0\n0,1\n"))
    np.testing.assert_array_equal(d.A, np.eye(2))
    np.testing.assert_array_equal(d.b, [0.0, 0.0])


def test_csv_with_b(tmp_path):
    d = read_csv(write(tmp_path, "a.csv", "2,1,b\n1.5,2\n-3,4\n"))
    np.testing.assert_array_equal(d.A, [[1.5], [-3.0]])
    np.testing.assert_array_equal(d.b, [2.0, 4.0])


def test_duplicate_index_reports_line(tmp_path):
    path = write(tmp_path, "a.svm", "+1 1:1\n-1 2:0.5 2:0.7\n")
    with pytest.raises(DatasetParseError) as info:
        read_libsvm(path)
    assert info.value.line == 2 and "duplicate" in str(info.value)


@pytest.mark.parametrize("text,line", [
    ("+1 1:1\n-1 x:2\n", 2),
    ("+1 1:abc\n", 1),
    ("+1 0:1\n", 1),
    ("+1 1 2\n", 1),
    ("+1 1:1\n\n-1 9:1\n", 3),
])
def test_libsvm_malformed(tmp_path, text, line):
    with pytest.raises(DatasetParseError) as info:
        read_libsvm(write(tmp_path, "a.svm", text), n_features=4)
    assert info.value.line == line


def test_bad_label(tmp_path):
    with pytest.raises(InvalidData, match=":2:"):
        read_libsvm(write(tmp_path, "a.svm", "+1 1:1\n2 1:1\n"))
    d = read_libsvm(write(tmp_path, "b.svm", "2.5 1:1\n"), labels=False)
    assert d.b[0] == 2.5


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("2\n1\n", 1),
    ("2,2\n1,0\n", 3),
    ("2,2\n1,0\n0\n", 3),
    ("2,2\n1,0\n0,nan\n", 3),
    ("x,2\n", 1),
])
def test_csv_malformed(tmp_path, text, line):
    with pytest.raises(DatasetParseError) as info:
        read_csv(write(tmp_path, "a.csv", text))
    assert info.value.line == line


def test_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 4))
    A[A < 0] = 0.0
    csv_data = DesignMatrix(A, rng.standard_normal(5))
    write_csv(csv_data, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.A, csv_data.A)
    np.testing.assert_array_equal(back.b, csv_data.b)

    svm = DesignMatrix(A, np.where(rng.random(5) < 0.5, -1.0, 1.0))
    write_libsvm(svm, tmp_path / "d.svm")
    back = load_dataset(tmp_path / "d.svm", n_features=4)
    np.testing.assert_array_equal(back.A, svm.A)
    np.testing.assert_array_equal(back.b, svm.b)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_dataset(tmp_path / "nope.csv")
