import math

import numpy as np
import pytest

import noisecnn as nc


def test_uniform_noise_matrix():
    phi = nc.build_uniform_noise(4, 0.4)
    assert phi.shape == (4, 4)
    assert np.all(np.diag(phi) == 0.7)
    assert phi[0, 1] == 0.1
    np.testing.assert_allclose(phi.sum(axis=0), 1.0, atol=1e-9)


def test_random_noise_diagonal_and_columns():
    phi = nc.build_random_noise(5, 0.3, seed=7)
    assert np.all(np.diag(phi) == 0.7)
    np.testing.assert_allclose(phi.sum(axis=0), 1.0, atol=1e-9)
    assert np.array_equal(phi, nc.build_random_noise(5, 0.3, seed=7))


def test_corruption_rate():
    clean = [i % 4 for i in range(100_000)]
    noisy = nc.sample_noisy_labels(clean, nc.build_uniform_noise(4, 0.4), seed=3)
    assert abs(nc.flip_fraction(clean, noisy) - 0.30) <= 0.01
    assert noisy == nc.sample_noisy_labels(clean, nc.build_uniform_noise(4, 0.4), seed=3)


def test_noise_layer_closed_forms():
    np.testing.assert_allclose(nc.apply_noise_layer(np.zeros((3, 3)), [0.2, 0.5, 0.3]), 1 / 3)
    q = nc.apply_noise_layer(2 * np.eye(2), [1.0, 0.0])
    np.testing.assert_allclose(q, [0.880797, 0.119203], atol=1e-6)
    p = nc.softmax([0.3, -1.0, 2.0])
    assert int(np.argmax(nc.apply_noise_layer(5 * np.eye(3), p))) == int(np.argmax(p))


def test_diagnostics():
    assert nc.pearson([[1, 2], [3, 4]], [[1, 2], [3, 5]]) == pytest.approx(0.9827, abs=1e-4)
    assert nc.frobenius_norm(4 * np.eye(4)) == pytest.approx(8.0)
    np.testing.assert_allclose(nc.column_normalize([[1, 2], [3, 2]]), [[0.25, 0.5], [0.75, 0.5]])
    phi = nc.build_class_dependent_noise([0.9, 0.7, 0.8, 0.6])
    resp = nc.softmax_response(np.log(phi + 1e-12))
    np.testing.assert_allclose(resp, phi, atol=1e-9)


def test_tokenize():
    assert nc.tokenize("Good movie!") == ["good", "movie"]


def test_synthetic_corpus_is_deterministic_and_linearly_solvable():
    a = nc.make_synthetic_corpus(seed=5)
    b = nc.make_synthetic_corpus(seed=5)
    assert a == b
    assert len(a["train"]) == 4000 and len(a["test"]) == 500
    sklearn = pytest.importorskip("sklearn")
    from sklearn.feature_extraction.text import CountVectorizer
    from sklearn.linear_model import LogisticRegression

    vec = CountVectorizer(token_pattern=r"\S+")
    x = vec.fit_transform([t for _, t in a["train"]])
    clf = LogisticRegression(max_iter=2000).fit(x, [y for y, _ in a["train"]])
    acc = clf.score(vec.transform([t for _, t in a["test"]]), [y for y, _ in a["test"]])
    assert acc >= 0.99


def test_linear_probe_separable():
    rng = np.random.default_rng(0)
    y = np.arange(200) % 2
    x = np.c_[np.where(y == 1, 2.0, -2.0) + rng.uniform(-1, 1, 200), rng.uniform(-3, 3, 200)]
    assert nc.linear_probe(x, y.tolist(), x, y.tolist(), 2) == 1.0


SMALL = """
[experiment]
variant = {variant}
seed = 4
[synthetic]
n_train = 400
n_dev = 100
n_test = 100
[model]
embed_dim = 8
feature_maps = 8
[train]
max_epochs = {epochs}
[noise]
kind = uniform
p = 0.4
"""


def test_run_experiment():
    out = nc.run_experiment(SMALL.format(variant="nmwregu", epochs=2))
    assert out["variant"] == "nmwregu"
    assert len(out["epochs"]) == 2
    assert 0.0 <= out["test_acc"] <= 1.0
    assert out["psi"].shape == (4, 4)
    again = nc.run_experiment(SMALL.format(variant="nmwregu", epochs=2))
    assert again["epochs"] == out["epochs"]

    untrained = nc.run_experiment(SMALL.format(variant="nmwregu", epochs=0))
    assert nc.frobenius_norm(untrained["psi"]) == pytest.approx(8.0)

    wonm = nc.run_experiment(SMALL.format(variant="wonm", epochs=1))
    assert wonm["psi"] is None


def test_checkpoint_round_trip(tmp_path):
    ckpt = tmp_path / "model.ckpt"
    out = nc.run_experiment(SMALL.format(variant="nmwregu", epochs=1), checkpoint=ckpt)
    info = nc.inspect_checkpoint(ckpt)
    assert info["variant"] == "nmwregu"
    assert info["labels"] == ["class0", "class1", "class2", "class3"]
    np.testing.assert_array_equal(info["psi"], out["psi"])
    corpus = nc.make_synthetic_corpus(seed=4, n_train=400, n_dev=100, n_test=100)
    test = tmp_path / "test.tsv"
    test.write_text("".join(f"{y}\t{t}\n" for y, t in corpus["test"]))
    assert nc.evaluate_checkpoint(ckpt, test) == pytest.approx(out["test_acc"])

    pooled = nc.extract_features(ckpt, test)
    assert pooled["features"].shape == (100, 8 * 3)
    assert pooled["noisy_labels"] is None
    np.testing.assert_array_equal(pooled["features"], nc.extract_features(ckpt, test)["features"])
    logits = nc.extract_features(ckpt, test, kind="logits")
    assert logits["features"].shape == (100, 4)
    pred = logits["features"].argmax(axis=1)
    assert np.mean(pred == np.array(logits["labels"])) == pytest.approx(out["test_acc"])


def test_bad_config_names_field():
    with pytest.raises(ValueError, match="train.lambda"):
        nc.run_experiment(SMALL.format(variant="wonm", epochs=1).replace("max_epochs = 1", "max_epochs = 1\nlambda = 0.01"))
    with pytest.raises(ValueError, match="experiment.variant"):
        nc.run_experiment("[experiment]\nvariant = nope\n")
