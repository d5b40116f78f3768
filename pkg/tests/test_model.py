import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from bayesdd.bdd import train_bdd, train_ml
from bayesdd.errors import DimensionMismatchError, ParameterError
from bayesdd.kernel import KernelSpec
from bayesdd.model import DescriptionModel, dumps, load_model, save_model
from bayesdd.ssdd import train_ssdd
from bayesdd.svdd import train_svdd


def models(rng):
    X = rng.normal(size=(12, 3))
    k = KernelSpec("gaussian", float(rng.uniform(0.5, 2)))
    return [train_svdd(X, 0.3, k), train_bdd(X, 0.5, k), train_ml(X, k),
            train_ssdd(X, rng.normal(size=(5, 3)), 0.5, k),
            train_svdd(X, 0.5, KernelSpec("linear", 1.0))]


def test_round_trip_scores(tmp_path):
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(40, 3))
    for i, m in enumerate(models(rng)):
        path = tmp_path / f"m{i}.json"
        save_model(m, path)
        back = load_model(path)
        assert_array_equal(back.alpha, m.alpha)
        assert_array_equal(back.score(Z), m.score(Z))
        assert back.method_tag == m.method_tag
        assert back.params == m.params
        assert back.solver == m.solver


def test_input_transform_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    m = train_bdd(rng.normal(size=(10, 2)), 0.5, KernelSpec("gaussian", 1.0))
    m.input_mean, m.input_scale = np.array([1.0, -2.0]), np.array([2.0, 0.5])
    m.__post_init__()
    Z = rng.normal(size=(5, 2))
    raw = m.score(Z)
    plain = DescriptionModel(m.train_points, m.alpha, m.kernel, m.center_norm_sq, "bdd")
    assert_array_equal(raw, plain.score((Z - [1.0, -2.0]) / [2.0, 0.5]))
    save_model(m, tmp_path / "m.json")
    assert_array_equal(load_model(tmp_path / "m.json").score(Z), raw)


def test_serialization_is_deterministic():
    rng = np.random.default_rng(2)
    a = dumps(train_bdd(rng.normal(size=(8, 2)), 0.5, KernelSpec("gaussian", 1.0)))
    rng = np.random.default_rng(2)
    b = dumps(train_bdd(rng.normal(size=(8, 2)), 0.5, KernelSpec("gaussian", 1.0)))
    assert a == b


def test_rejects_foreign_documents():
    doc = json.loads(dumps(train_ml([[0.0]], KernelSpec("gaussian", 1.0))))
    with pytest.raises(ParameterError):
        DescriptionModel.from_dict({**doc, "format": "other"})
    with pytest.raises(ParameterError):
        DescriptionModel.from_dict({**doc, "version": 99})


def test_score_dimension_checked():
    m = train_ml([[0.0, 1.0]], KernelSpec("gaussian", 1.0))
    with pytest.raises(DimensionMismatchError):
        m.score([[1.0, 2.0, 3.0]])


def test_validation():
    with pytest.raises(ParameterError):
        DescriptionModel(np.zeros((2, 1)), [1.0], KernelSpec(), 1.0, "bdd")
    with pytest.raises(ParameterError):
        DescriptionModel(np.zeros((1, 1)), [1.0], KernelSpec(), 1.0, "nope")
