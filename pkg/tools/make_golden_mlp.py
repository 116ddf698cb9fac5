"""Regenerate tests/data/golden_mlp.json (a small trained network and a recorded score)."""

import json
from pathlib import Path

import numpy as np

from touchintent.models import FeatureMask, LabeledDataset, mlp_train, save_model

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"


def fixture():
    rng = np.random.default_rng(7)
    X = rng.random((120, 5))
    y = (X[:, 0] + 0.5 * X[:, 3] > 0.8).astype(int)
    return LabeledDataset(X, y)


def main():
    model = mlp_train(fixture(), FeatureMask.full(), epochs=300, seed=3)
    save_model(model, DATA / "golden_mlp.json")
    x = [0.2, 0.4, 0.6, 0.8, 1.0]
    label, score = model.predict(np.array(x))
    (DATA / "golden_mlp_io.json").write_text(json.dumps({"input": x, "label": label, "score": score}) + "\n")
    print(label, repr(score))


if __name__ == "__main__":
    main()
