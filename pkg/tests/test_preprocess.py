import numpy as np
import pandas as pd
import pytest

from src.config import PreprocessMode
from src.errors import EmptyInput, NonPositiveIntensity, ShapeMismatch
from src.preprocess import (
    fit_preprocessor,
    preprocess_for_mode,
    preprocess_global,
    quantile_normalize,
    reference_quantiles,
    standardize,
    transform,
    write_matrix_csv,
)


@pytest.fixture
def raw():
    rng = np.random.default_rng(5)
    return np.exp2(rng.normal(10.0, 1.0, size=(12, 6)))


def test_eq1_moments_on_simple_column():
    params = fit_preprocessor(np.array([[1.0], [2.0], [4.0]]))
    assert params.means[0] == pytest.approx(1.0)
    assert params.sds[0] == pytest.approx(1.0)
    assert params.fitted_on == 3


def test_constant_feature_maps_to_zero():
    m = np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 8.0]])
    params = fit_preprocessor(m)
    assert params.sds[0] == 0.0
    assert np.all(standardize(params, m)[:, 0] == 0.0)


def test_reference_is_sorted_and_sized():
    rng = np.random.default_rng(0)
    params = fit_preprocessor(np.exp2(rng.normal(size=(5, 3))))
    assert params.reference.shape == (3,)
    assert np.all(np.diff(params.reference) >= 0)


def test_quantile_example():
    m = np.array([[2.0, 6.0, 4.0], [8.0, 3.0, 1.0]])
    ref = reference_quantiles(m)
    assert ref.tolist() == [1.5, 3.5, 7.0]
    assert quantile_normalize(m, ref).tolist() == [[1.5, 7.0, 3.5], [7.0, 3.5, 1.5]]


def test_tied_ranks_share_mean_reference():
    out = quantile_normalize(np.array([[5.0, 5.0, 1.0]]), np.array([0.0, 2.0, 4.0]))
    assert out.tolist() == [[3.0, 3.0, 0.0]]


def test_training_rows_share_the_reference(raw):
    params = fit_preprocessor(raw)
    out = transform(params, raw)
    for row in out:
        assert np.array_equal(np.sort(row), params.reference)


def test_standardized_intermediate_moments(raw):
    z = standardize(fit_preprocessor(raw), raw)
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(z.std(axis=0, ddof=1), 1.0, atol=1e-10)


def test_global_equals_fit_then_transform(raw):
    assert np.array_equal(preprocess_global(raw), transform(fit_preprocessor(raw), raw))


def test_permutation_equivariance(raw):
    perm = np.random.default_rng(1).permutation(raw.shape[0])
    assert np.allclose(preprocess_global(raw[perm]), preprocess_global(raw)[perm], atol=1e-12)


def test_scaling_a_feature_leaves_standardized_column(raw):
    scaled = raw.copy()
    scaled[:, 2] *= 2.0**3
    a = standardize(fit_preprocessor(raw), raw)
    b = standardize(fit_preprocessor(scaled), scaled)
    assert np.allclose(a[:, 2], b[:, 2], atol=1e-10)


def test_transform_checks_shape(raw):
    params = fit_preprocessor(raw)
    with pytest.raises(ShapeMismatch):
        transform(params, raw[:, :3])


def test_rejects_empty_and_nonpositive():
    with pytest.raises(EmptyInput):
        fit_preprocessor(np.empty((0, 3)))
    with pytest.raises(NonPositiveIntensity):
        fit_preprocessor(np.array([[1.0, 0.0], [2.0, 3.0]]))


def test_preprocess_for_mode(raw):
    assert np.array_equal(preprocess_for_mode(raw, PreprocessMode.GLOBAL), preprocess_global(raw))
    assert np.array_equal(preprocess_for_mode(raw, PreprocessMode.FOLD_SAFE), raw)


def test_write_matrix_csv_uses_twelve_digits(tmp_path, raw):
    out = preprocess_global(raw)
    path = str(tmp_path / "m.csv")
    write_matrix_csv(out, path, row_ids=[f"S{i}" for i in range(out.shape[0])], column_names=list("abcdef"))
    back = pd.read_csv(path)
    assert list(back.columns) == ["sample_id"] + list("abcdef")
    assert np.array_equal(back[list("abcdef")].to_numpy(), np.array([[float("%.12g" % v) for v in row] for row in out]))
