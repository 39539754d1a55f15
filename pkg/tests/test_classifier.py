import hashlib

import numpy as np
import pytest

from chemclip.classifier import ActivityClassifier, pos_weight, weighted_bce
from chemclip.exceptions import Undefined


def test_pos_weight():
    y = np.zeros(10000, dtype=bool)
    y[:2318] = True
    assert pos_weight(y) == pytest.approx(3.314, abs=1e-3)
    with pytest.raises(Undefined):
        pos_weight(np.zeros(5, dtype=bool))


def test_weighted_bce_value_and_gradient():
    z = np.array([0.3, -1.2, 2.0])
    y = np.array([1.0, 0.0, 1.0])
    loss, grad = weighted_bce(z, y, 2.0)
    s = 1 / (1 + np.exp(-z))
    want = -np.mean(2.0 * y * np.log(s) + (1 - y) * np.log(1 - s))
    assert loss == pytest.approx(want)
    h = 1e-6
    num = [(weighted_bce(z + h * e, y, 2.0)[0] - weighted_bce(z - h * e, y, 2.0)[0]) / (2 * h)
           for e in np.eye(3)]
    assert np.allclose(num, grad, atol=1e-8)


def test_bce_stable_for_large_logits():
    loss, grad = weighted_bce(np.array([800.0, -800.0]), np.array([0.0, 1.0]), 1.0)
    assert np.isfinite(loss) and np.all(np.isfinite(grad))


def blobs(n, seed, shift=2.0):
    rng = np.random.default_rng(seed)
    y = rng.random(n) < 0.3
    X = rng.normal(size=(n, 8)) + shift * y[:, None]
    return X, y


def test_separable_data_is_learned():
    X, y = blobs(300, 0)
    Xv, yv = blobs(100, 1)
    Xt, yt = blobs(200, 2)
    clf = ActivityClassifier(epochs=30, seed=0).fit(X, y, Xv, yv)
    rep = clf.evaluate(Xt, yt)
    assert rep.auc > 0.95
    assert clf.predict(Xt).dtype == bool


def test_shuffled_labels_give_chance_auc():
    X, y = blobs(400, 3, shift=0.0)
    Xt, yt = blobs(400, 4, shift=0.0)
    clf = ActivityClassifier(epochs=20, seed=0).fit(X, y, X[:100], y[:100])
    assert abs(clf.evaluate(Xt, yt).auc - 0.5) < 0.1


def test_inputs_are_not_modified():
    X, y = blobs(100, 5)
    digest = hashlib.sha256(X.tobytes()).hexdigest()
    ActivityClassifier(epochs=3).fit(X, y)
    assert hashlib.sha256(X.tobytes()).hexdigest() == digest


def test_save_load(tmp_path):
    X, y = blobs(100, 6)
    clf = ActivityClassifier(epochs=3, seed=1).fit(X, y)
    clf.save(tmp_path / "c.cclp")
    back = ActivityClassifier.load(tmp_path / "c.cclp")
    assert np.array_equal(clf.predict_proba(X), back.predict_proba(X))
    assert back.threshold_ == clf.threshold_


def test_deterministic():
    X, y = blobs(120, 7)
    a = ActivityClassifier(epochs=5, seed=2).fit(X, y).predict_proba(X)
    b = ActivityClassifier(epochs=5, seed=2).fit(X, y).predict_proba(X)
    assert np.array_equal(a, b)
