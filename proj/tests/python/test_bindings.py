# Copyright 2026 The slidetune Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import slidetune


def test_pooling_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(11, 6))
    np.testing.assert_allclose(slidetune.mean_pool(x), x.mean(axis=0), atol=1e-14)
    np.testing.assert_array_equal(slidetune.max_pool(x), x.max(axis=0))
    np.testing.assert_array_equal(slidetune.mean_pool(x), slidetune.mean_pool(x[::-1].copy()))
    with pytest.raises(slidetune.ShapeError):
        slidetune.mean_pool(np.zeros(3))


def test_gated_attention_against_numpy():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 4))
    V, U, w = rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), rng.normal(size=3)
    rep, att = slidetune.gated_attention_pool(x, V, U, w)
    scores = (np.tanh(x @ V.T) * (1 / (1 + np.exp(-(x @ U.T))))) @ w
    expected = np.exp(scores - scores.max())
    expected /= expected.sum()
    np.testing.assert_allclose(att, expected, atol=1e-12)
    np.testing.assert_allclose(rep, expected @ x, atol=1e-12)


def test_cross_entropy_uniform_is_log_k():
    for k in (2, 3, 30):
        loss, grad = slidetune.softmax_cross_entropy(np.zeros(k), 0)
        assert abs(loss - math.log(k)) < 1e-12
        assert abs(grad.sum()) < 1e-12


def test_model_forward_backward_and_checkpoint(tmp_path):
    model = slidetune.Model("simlp", 8, 3, seed=4, hidden_width=16)
    assert model.parameter_count == 8 * 16 + 16 + 16 * 3 + 3
    assert "aggregator=mean" in model.spec
    x = np.random.default_rng(2).normal(size=(6, 8))
    label, probs = model.predict(x)
    assert label == int(np.argmax(model.forward(x)))
    assert abs(probs.sum() - 1) < 1e-12
    loss, grad = model.loss_and_backward(x, 1)
    assert loss > 0 and grad.shape == x.shape
    grads = model.parameters(gradients=True)
    assert set(grads) == set(model.parameters())
    path = tmp_path / "m.ckpt"
    model.save(path)
    back = slidetune.Model.load(path)
    np.testing.assert_array_equal(back.forward(x), model.forward(x))
    with pytest.raises(slidetune.ConfigError):
        slidetune.Model("nope", 8, 3)


def test_fit_reduces_loss_and_is_deterministic(small_corpus):
    a = slidetune.Model("linear", 8, 3)
    b = slidetune.Model("linear", 8, 3)
    la = a.fit(small_corpus, epochs=5, learning_rate=1e-2)
    lb = b.fit(small_corpus, epochs=5, learning_rate=1e-2)
    assert la == lb
    assert la[-1] < la[0]


def test_metrics():
    assert slidetune.balanced_accuracy([0, 0, 1], [0, 1, 1], 2) == 0.75
    assert abs(slidetune.weighted_f1([0, 0, 1, 1], [0, 0, 0, 1], 2) - 11 / 15) < 1e-15
    scores = np.array([[0.9, 0.1], [0.6, 0.4], [0.3, 0.7], [0.2, 0.8]])
    assert slidetune.roc_auc([0, 0, 1, 1], scores) == 1.0
    lo, hi = slidetune.bootstrap_ci([0, 1, 0, 1], [0, 1, 0, 1], scores, resamples=200)
    assert lo == hi == 1.0
    with pytest.raises(slidetune.SlidetuneError):
        slidetune.roc_auc([1, 1], scores[:2])


def test_embedding_roundtrip_and_errors(tmp_path):
    x = np.random.default_rng(5).normal(size=(9, 7))
    p = tmp_path / "x.emb"
    slidetune.write_embedding(p, x)
    np.testing.assert_array_equal(slidetune.read_embedding(p), x)
    slidetune.write_embedding(p, x, dtype="f32")
    np.testing.assert_array_equal(slidetune.read_embedding(p), x.astype(np.float32).astype(np.float64))
    data = p.read_bytes()
    p.write_bytes(data[:-3])
    with pytest.raises(slidetune.FormatError, match="byte offset"):
        slidetune.read_embedding(p)


def test_gradcheck_all_methods():
    for method in ("linear", "simlp", "mean+gelu", "mean+swiglu", "abmil"):
        assert slidetune.gradcheck(method, seed=2) <= 1e-4


def test_run_experiment_and_render(small_corpus):
    records = slidetune.run_experiment(
        "benchmark", small_corpus, ["linear", "simlp"], seeds=[0, 1], epochs=2,
        bootstrap=100, hidden_width=16,
    )
    assert len(records) == 4
    assert {r["method"] for r in records} == {"linear", "simlp"}
    assert all(r["ok"] for r in records)
    import json
    text = slidetune.render_tables([json.dumps(r) for r in records])
    assert "linear" in text and "simlp" in text


def test_run_experiment_writes_nothing_without_output_dir(small_corpus, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    slidetune.run_experiment("benchmark", small_corpus, ["linear"], seeds=[0], epochs=1,
                             bootstrap=100)
    assert list(tmp_path.iterdir()) == []
