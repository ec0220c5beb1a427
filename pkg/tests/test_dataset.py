import numpy as np
import pytest

from gem.dataset import (
    DataError,
    Dataset,
    Schema,
    Variable,
    dataset_schema,
    load_dataset,
    save_dataset,
    validate_dataset,
)

from conftest import drop_rows, synth


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_round_trip_is_exact(tmp_path, two_factor):
    d = two_factor.data
    save_dataset(d, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv", dataset_schema(d))
    assert np.array_equal(back.Y, d.Y)
    assert back.sample_ids == d.sample_ids
    for a, b in zip(d.variables, back.variables):
        assert a.spec.kind == b.spec.kind
        assert list(a.values) == list(b.values)


def test_kind_inference_and_forcing(tmp_path):
    p = write(tmp_path, "id,grp,dose,y1,y2\na,c,1,0.5,1\nb,t,2,0.1,2\nc,c,1,0.7,3\nd,t,2,0.2,4\n")
    d = load_dataset(p, Schema(responses="y", id_column="id"))
    assert d.variable("grp").spec.is_categorical
    assert not d.variable("dose").spec.is_categorical
    d2 = load_dataset(p, Schema(responses="y", id_column="id", categorical=["dose"]))
    assert d2.variable("dose").spec.levels == ("1", "2")


@pytest.mark.parametrize("responses, expect", [
    ("y", ["y1", "y2", "y3"]),
    ("y1:y2", ["y1", "y2"]),
    (["y3", "y1"], ["y3", "y1"]),
])
def test_response_selection(tmp_path, responses, expect):
    p = write(tmp_path, "g,y1,y2,y3\na,1,2,3\nb,4,5,6\na,7,8,9\n")
    assert list(load_dataset(p, Schema(responses=responses, variables=["g"])).response_names) == expect


@pytest.mark.parametrize("text, message", [
    ("g,y1\na,1\nb,\na,3\n", "missing value at (2, y1)"),
    ("g,y1\na,1\n,2\na,3\n", "missing value at (2, g)"),
    ("g,y1\na,1\nb,NA\na,3\n", "missing value at (2, y1)"),
    ("g,y1\na,1\nb,x\na,3\n", "non-numeric response"),
    ("g,y1\na,1\nb,2\n", "at least 3 samples"),
    ("g,y1\na,1,9\nb,2\na,3\n", "row 1 has 3 cells"),
    ("g,g\na,1\nb,2\na,3\n", "duplicate column"),
])
def test_load_errors(tmp_path, text, message):
    with pytest.raises(DataError, match=message.replace("(", r"\(").replace(")", r"\)")):
        load_dataset(write(tmp_path, text), Schema(responses="y", variables=["g"]))


def test_duplicate_ids_and_missing_file(tmp_path):
    p = write(tmp_path, "id,g,y1\na,x,1\na,y,2\nb,x,3\n")
    with pytest.raises(DataError, match="duplicate sample id"):
        load_dataset(p, Schema(responses="y", id_column="id"))
    with pytest.raises(DataError, match="no such file"):
        load_dataset(tmp_path / "nope.csv", Schema(responses="y"))


def test_dataset_rejects_non_finite():
    with pytest.raises(DataError, match="non-finite"):
        Dataset(Y=np.array([[1.0], [np.nan], [2.0]]), response_names=("y",), sample_ids=("a", "b", "c"),
                variables=(Variable.categorical("g", ["a", "b", "a"]),))


def test_validation_report_balanced_design(two_factor):
    rep = validate_dataset(two_factor.data)
    assert rep.balanced
    assert rep.level_counts["f2"] == {"L1": 6, "L2": 6, "L3": 6}
    assert set(rep.cell_counts.values()) == {3}
    assert "balanced design" in rep.lines()


def test_validation_flags_problems():
    d = Dataset(
        Y=np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]]),
        response_names=("y1", "y2"),
        sample_ids=tuple("abcd"),
        variables=(
            Variable.categorical("g", ["a", "a", "b", "b"], ["a", "b", "c"]),
            Variable.continuous("age", [3.0, 3.0, 3.0, 3.0]),
        ),
    )
    rep = validate_dataset(d)
    assert rep.zero_variance_responses == ("y2",)
    assert rep.constant_variables == ("age",)
    assert rep.empty_levels == (("g", "c"),)
    assert not rep.balanced
    assert "empty level: g=c" in rep.lines()


def test_subset_keeps_declared_levels_and_reports_empty():
    d = synth(levels=(3,), reps=3, N=6).data
    sub = drop_rows(d, [0, 1, 2])
    assert sub.variable("f1").spec.levels == ("L1", "L2", "L3")
    assert validate_dataset(sub).empty_levels == (("f1", "L1"),)


def test_unbalanced_after_dropping_rows():
    d = synth(levels=(2, 2), reps=3, N=6).data
    assert not validate_dataset(drop_rows(d, [0, 7])).balanced
