"""
Plugging in external features
=============================

Any feature extractor works as long as it writes the plain-text feature
format. Here random 512-dimensional vectors stand in for CNN embeddings;
the model inserts a trainable affine+ReLU adapter down to 3 qubits.
"""

import tempfile
from pathlib import Path

import numpy as np

from qtl.ansatz import AnsatzSpec, Family
from qtl.data import Dataset, load_features, save_features
from qtl.hybrid import TrainConfig, init_model, train

rng = np.random.default_rng(3)
labels = np.repeat(np.arange(3), 40)
embeddings = rng.normal(size=(120, 512)) + 0.4 * labels[:, None]

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "features.csv"
    save_features(Dataset(embeddings, labels, 3), path, comments=["extractor: stand-in"])
    print(path.read_text().splitlines()[1][:60], "...")
    data = load_features(path)

model = init_model(AnsatzSpec(Family.STRONG_ENTANGLING, 2, 3), classes=3, seed=0, input_dim=data.feature_dim)
print("adapter weights:", model.adapter.weights.shape)
model, metrics = train(model, data, TrainConfig(epochs=30, head_learning_rate=0.05, seed=0))
print("test accuracy:", round(metrics.accuracy, 3), "per-class F1:", np.round(metrics.per_class_f1, 3))
