import json
from pathlib import Path

import numpy as np
import pytest

from touchintent.models import (
    ABLATION_MASKS, ConfusionMatrix, FeatureMask, KnnSpec, LabeledDataset, MlpModel, MlpSpec,
    ModelError, ModelFormatError, ParameterError, TrainingError, ablation_study, cross_validate,
    knn_fit, knn_predict, load_model, mlp_init, mlp_loss_and_grads, mlp_predict, mlp_train,
    save_model,
)

DATA = Path(__file__).parent / "data"


def knn_oracle(rows, labels, k, x):
    """Full linear scan: the k-th smallest distance sets the radius, every row within it votes."""
    d = []
    for r in rows:
        s = 0.0
        for a, b in zip(x, r):
            s += (a - b) * (a - b)
        d.append(s)
    radius = sorted(d)[k - 1]
    voters = [lab for dist, lab in zip(d, labels) if dist <= radius]
    pos = sum(voters)
    return int(2 * pos > len(voters)), pos / len(voters)


def random_dataset(rng, n=300, quantise=None):
    X = rng.random((n, 5))
    if quantise:
        X = np.round(X * quantise) / quantise
    X[:, 0] = (X[:, 0] > 0.5).astype(float)
    y = ((X[:, 1] < 0.4) & (X[:, 0] == 1)).astype(int)
    flip = rng.random(n) < 0.1
    y[flip] = 1 - y[flip]
    return LabeledDataset(X, y)


def separable(rng, n=200):
    X = np.vstack([rng.uniform(0, 0.1, (n // 2, 5)), rng.uniform(0.9, 1.0, (n // 2, 5))])
    y = np.r_[np.zeros(n // 2, int), np.ones(n // 2, int)]
    return LabeledDataset(X, y)


# ---------------------------------------------------------------- kNN

def test_knn_examples():
    d = LabeledDataset(np.array([[1, 0, 0, 0, 0], [0, 1, 0, 0, 0], [1, 0.5, 0, 0, 0]]), np.array([1, 0, 1]))
    m = knn_fit(d, FeatureMask.full(), 1)
    assert m.rows.shape == (3, 5)
    with pytest.raises(ParameterError):
        knn_fit(d, FeatureMask.full(), 4)
    with pytest.raises(ParameterError):
        knn_fit(d, FeatureMask.full(), 5)
    hp = FeatureMask.parse("HP")
    d2 = LabeledDataset(np.array([[0, 0, 0, 0, 0], [0, 1, 0, 0, 0]]), np.array([1, 0]))
    m2 = knn_fit(d2, hp, 1)
    assert knn_predict(m2, [0.1]) == (1, 1.0)
    for row, lab in zip(d.X, d.y):
        assert m.predict(row)[0] == lab


def test_knn_accepts_k11_on_3002_rows(rng):
    d = LabeledDataset(rng.random((3002, 5)), (rng.random(3002) < 0.3).astype(int))
    assert knn_fit(d, FeatureMask.full(), 11).k == 11


@pytest.mark.parametrize("k", [1, 11, 51])
@pytest.mark.parametrize("quantise", [None, 4])
def test_knn_matches_oracle(k, quantise):
    rng = np.random.default_rng(k + (quantise or 0))
    d = random_dataset(rng, 400, quantise)
    for mask in (FeatureMask.full(), FeatureMask.parse("TS"), FeatureMask.parse("HP,GA")):
        m = knn_fit(d, mask, k)
        Q = rng.random((200, 5))
        if quantise:
            Q = np.round(Q * quantise) / quantise
        Q = Q[:, mask.columns]
        labels, votes = m.predict_batch(Q)
        for q, lab, v in zip(Q, labels, votes):
            ol, ov = knn_oracle(m.rows, m.labels, k, q)
            assert lab == ol and v == ov
            assert m.predict(q) == (ol, ov)


def test_knn_permutation_invariant(rng):
    d = random_dataset(rng, 300, quantise=3)
    m = knn_fit(d, FeatureMask.full(), 11)
    perm = rng.permutation(d.n_samples)
    m2 = knn_fit(d.subset(perm), FeatureMask.full(), 11)
    Q = np.round(rng.random((200, 5)) * 3) / 3
    a = m.predict_batch(Q)
    b = m2.predict_batch(Q)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_ts_only_is_function_of_gamma(corpus):
    data = corpus[0]
    m = knn_fit(data, FeatureMask.parse("TS"), 11)
    pred, _ = m.predict_batch(data.matrix(FeatureMask.parse("TS")))
    g = data.X[:, 0]
    for value in (0.0, 1.0):
        assert len(set(pred[g == value])) == 1


def test_split_vote_is_unintentional():
    d = LabeledDataset(np.array([[0.5, 0, 0, 0, 0], [0.5, 0, 0, 0, 0]]), np.array([1, 0]))
    m = knn_fit(d, FeatureMask.parse("TS"), 1)
    assert m.predict([0.5]) == (0, 0.5)


# ---------------------------------------------------------------- MLP

def test_mlp_gradient_check():
    h = 1e-5
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        X = rng.random((40, 5))
        y = (rng.random(40) < 0.4).astype(float)
        model = MlpModel(*mlp_init(5, 10, seed), mask=FeatureMask.full())
        _, grads = mlp_loss_and_grads(model, X, y)
        params = model.params()
        slots = [(i, idx) for i, p in enumerate(params) for idx in np.ndindex(p.shape)]
        chosen = rng.choice(len(slots), 20, replace=False)
        for c in chosen:
            i, idx = slots[c]
            p = params[i]
            old = p[idx]
            p[idx] = old + h
            lp, _ = mlp_loss_and_grads(model, X, y)
            p[idx] = old - h
            lm, _ = mlp_loss_and_grads(model, X, y)
            p[idx] = old
            num = (lp - lm) / (2 * h)
            ana = grads[i][idx]
            rel = abs(num - ana) / max(abs(num), abs(ana))
            assert rel < 1e-4, (seed, i, idx, num, ana)


def test_mlp_separable_and_monotone_loss(rng):
    d = separable(rng)
    m = mlp_train(d, FeatureMask.full(), epochs=500, seed=0)
    assert m.metadata["train_accuracy"] >= 0.99
    hist = np.array(m.metadata["loss_history"])
    assert np.all(np.diff(hist) <= 1e-15)


def test_mlp_zero_epochs_is_initialisation():
    d = separable(np.random.default_rng(0))
    m = mlp_train(d, FeatureMask.full(), epochs=0, seed=5)
    for a, b in zip(m.params(), mlp_init(5, 10, 5)):
        assert np.array_equal(a, b)


def test_mlp_deterministic():
    d = separable(np.random.default_rng(0))
    a = mlp_train(d, FeatureMask.full(), epochs=50, seed=2)
    b = mlp_train(d, FeatureMask.full(), epochs=50, seed=2)
    for x, y in zip(a.params(), b.params()):
        assert np.array_equal(x, y)


def test_mlp_symmetric_zero_input():
    W2 = np.array([[0.3, -0.3, 0.7, -0.7]])
    m = MlpModel(np.ones((4, 2)), np.zeros(4), W2, np.zeros(1), FeatureMask.parse("TS,HP"))
    assert mlp_predict(m, [0.0, 0.0]) == (1, 0.5)


def test_mlp_single_neuron_weight_scaling():
    x = np.array([0.3, 0.9])
    scores = []
    for s in (0.5, 1.0, 2.0, 4.0):
        m = MlpModel(np.array([[1.0, 1.0]]), np.zeros(1), np.array([[s]]), np.zeros(1),
                     FeatureMask.parse("TS,HP"))
        scores.append(m.predict(x)[1])
    assert all(a < b for a, b in zip(scores, scores[1:]))


def test_mlp_shape_and_divergence_errors():
    d = separable(np.random.default_rng(0))
    m = mlp_train(d, FeatureMask.parse("TS,HP"), epochs=5)
    with pytest.raises(ModelError):
        m.predict(np.zeros(5))
    with pytest.raises(TrainingError):
        mlp_train(d, FeatureMask.full(), epochs=20, learning_rate=1e308)
    one_class = LabeledDataset(d.X, np.zeros(d.n_samples, int))
    with pytest.raises(TrainingError):
        mlp_train(one_class, FeatureMask.full(), epochs=5)


def test_golden_mlp():
    m = load_model(DATA / "golden_mlp.json")
    io = json.loads((DATA / "golden_mlp_io.json").read_text())
    label, score = m.predict(np.array(io["input"]))
    assert label == io["label"]
    assert abs(score - io["score"]) < 1e-12


# ---------------------------------------------------------------- evaluation

def test_confusion_identity(rng):
    for _ in range(50):
        y = rng.integers(0, 2, 100)
        p = rng.integers(0, 2, 100)
        cm = ConfusionMatrix.from_labels(y, p)
        assert cm.total == 100
        assert abs(cm.accuracy - np.mean(y == p)) < 1e-12


def test_cv_separable(rng):
    r = cross_validate(separable(rng), FeatureMask.full(), KnnSpec(3), 5, seed=1)
    assert r.accuracy == 1.0 and r.confusion.fp == 0 and r.confusion.fn == 0
    assert r.confusion.total == 200


def test_cv_reproducible(rng):
    d = random_dataset(rng)
    a = cross_validate(d, FeatureMask.full(), KnnSpec(11), 5, seed=3)
    b = cross_validate(d, FeatureMask.full(), KnnSpec(11), 5, seed=3)
    assert a == b
    assert abs(a.accuracy - np.mean(a.fold_accuracies)) < 1e-15


def test_cv_label_permutation_baseline(rng):
    d = random_dataset(rng, 600)
    prior = max(d.y.mean(), 1 - d.y.mean())
    accs = []
    for seed in range(10):
        r = np.random.default_rng(seed)
        shuffled = LabeledDataset(d.X, r.permutation(d.y))
        accs.append(cross_validate(shuffled, FeatureMask.full(), KnnSpec(11), 5, seed).accuracy)
    assert abs(np.mean(accs) - prior) <= 0.05


def test_cv_missing_class_errors():
    X = np.random.default_rng(0).random((20, 5))
    y = np.zeros(20, int)
    y[3] = 1
    with pytest.raises(ModelError):
        cross_validate(LabeledDataset(X, y), FeatureMask.full(), KnnSpec(1), 5, 0)
    with pytest.raises(ParameterError):
        cross_validate(LabeledDataset(X, y), FeatureMask.full(), KnnSpec(1), 1, 0)


def test_ablation_sorted_and_needs_two_masks(rng):
    d = random_dataset(rng)
    masks = [FeatureMask.parse(m) for m in ABLATION_MASKS]
    rows = ablation_study(d, masks, [KnnSpec(11)], 5, 0)
    assert len(rows) == 7
    accs = [r.accuracy for r in rows]
    assert accs == sorted(accs, reverse=True)
    with pytest.raises(ParameterError):
        ablation_study(d, masks[:1], [KnnSpec(11)])


def test_hp_only_can_be_all_negative(rng):
    n = 1000
    X = np.zeros((n, 5))
    X[:, 1] = rng.random(n)
    y = (rng.random(n) < 0.1).astype(int)
    r = cross_validate(LabeledDataset(X, y), FeatureMask.parse("HP"), KnnSpec(11), 5, 0)
    assert r.confusion.tp <= 2


def test_ablation_ordering_on_corpus(corpus):
    data = corpus[0]
    acc = {m: cross_validate(data, FeatureMask.parse(m), KnnSpec(11), 5, 1).accuracy
           for m in ("TS,HP,HS,GA,GS", "TS", "HP")}
    assert acc["TS,HP,HS,GA,GS"] > acc["TS"] > acc["HP"]


def test_mlp_spec_in_cv(rng):
    r = cross_validate(separable(rng), FeatureMask.full(), MlpSpec(epochs=300), 5, 0)
    assert r.accuracy == 1.0
    assert r.model == "NN [n,10,1]"


# ---------------------------------------------------------------- files

def test_model_files_round_trip(tmp_path, rng):
    d = random_dataset(rng)
    for m in (knn_fit(d, FeatureMask.parse("TS,HP"), 11),
              mlp_train(d, FeatureMask.parse("TS,HP,GA"), epochs=20, seed=1)):
        p = tmp_path / f"{m.kind}.json"
        save_model(m, p)
        m2 = load_model(p)
        assert m2.mask == m.mask and m2.kind == m.kind
        X = d.matrix(m.mask)
        assert np.array_equal(m.predict_batch(X)[0], m2.predict_batch(X)[0])
        assert np.array_equal(m.predict_batch(X)[1], m2.predict_batch(X)[1])


def test_model_version_mismatch(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"format_version": 99, "kind": "knn"}))
    with pytest.raises(ModelFormatError):
        load_model(p)
    p.write_text("not json")
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_mask_parsing():
    assert str(FeatureMask.parse("hp, ts")) == "TS,HP"
    assert FeatureMask.parse("TS").gated and not FeatureMask.parse("HP").gated
    with pytest.raises(ParameterError):
        FeatureMask.parse("XX")
    with pytest.raises(ParameterError):
        FeatureMask.parse("")
