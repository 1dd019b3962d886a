import numpy as np
import pytest

from crowdwisdom.core import (
    ClassProbabilities,
    GroundTruth,
    Kind,
    Orientation,
    ResponseMatrix,
    ScoreVector,
    ValidationError,
    require_valid,
    validate_dataset,
)


def test_valid_dataset_has_empty_report():
    m = ResponseMatrix.from_array([[0.1, 0.2, 0.3], [1.0, 0.0, 2.0]])
    assert validate_dataset(m, GroundTruth([1, 0, 1])) == []


def test_nan_is_reported_with_position():
    m = ResponseMatrix.from_array([[0.1, np.nan, 0.3], [1.0, 0.0, 2.0]])
    report = validate_dataset(m)
    assert [v.code for v in report] == ["non_finite"]
    assert report[0].index == (0, 1)
    assert "row 0, column 1" in report[0].message


def test_single_class_labels_reported():
    m = ResponseMatrix.from_array([[0.1, 0.2, 0.3], [1.0, 0.0, 2.0]])
    report = validate_dataset(m, GroundTruth([1, 1, 1]))
    assert any(v.message == "single-class labels" for v in report)
    assert validate_dataset(m, GroundTruth([1, 1, 1]), require_both_classes=False) == []


def test_shape_and_id_violations():
    m = ResponseMatrix([[1.0, 2.0]], ("a",), ("q", "q"))
    codes = {v.code for v in validate_dataset(m)}
    assert {"too_few_individuals", "too_few_questions", "duplicate_id"} <= codes


def test_binary_kind_checks_values():
    m = ResponseMatrix(np.array([[0, 1, 0.5], [1, 0, 1]]), ("a", "b"), ("x", "y", "z"), Kind.BINARY)
    assert [v.code for v in validate_dataset(m)] == ["not_binary"]


def test_length_and_probability_range():
    m = ResponseMatrix.from_array(np.zeros((2, 4)) + np.arange(4))
    report = validate_dataset(m, GroundTruth([0, 1, 1]), ClassProbabilities([0.1, 1.2, 0.5, 0.2]))
    codes = [v.code for v in report]
    assert "length_mismatch" in codes and "prob_range" in codes


def test_validation_is_pure():
    values = np.array([[0.1, np.inf, 0.3], [1.0, 0.0, 2.0]])
    m = ResponseMatrix.from_array(values)
    first = [str(v) for v in validate_dataset(m)]
    second = [str(v) for v in validate_dataset(m)]
    assert first == second
    assert np.array_equal(m.values, values)


def test_types_are_immutable():
    m = ResponseMatrix.from_array(np.eye(3))
    with pytest.raises(ValueError):
        m.values[0, 0] = 5.0
    s = ScoreVector([1.0, 2.0])
    with pytest.raises(ValueError):
        s.scores[0] = 3.0


def test_from_array_infers_kind():
    assert ResponseMatrix.from_array([[0, 1, 1], [1, 0, 0]]).kind is Kind.BINARY
    assert ResponseMatrix.from_array([[0, 1, 2], [1, 0, 0]]).kind is Kind.CONTINUOUS


def test_negated_toggles_orientation():
    s = ScoreVector([1.0, -2.0], method_tag="pca").negated()
    assert s.orientation is Orientation.FLIPPED
    assert list(s.scores) == [-1.0, 2.0]
    assert s.negated().orientation is Orientation.AS_COMPUTED


def test_require_valid_raises():
    with pytest.raises(ValidationError):
        require_valid(ResponseMatrix.from_array([[1.0, 2.0, 3.0]]))
