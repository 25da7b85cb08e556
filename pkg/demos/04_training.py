"""
Training a hybrid classifier
============================

Synthetic two-class data, a stratified split, and Adam on the circuit angles
and the softmax head.
"""

import numpy as np

from qtl.ansatz import AnsatzSpec, Family
from qtl.data import gen_synthetic
from qtl.hybrid import TrainConfig, init_model, train

data = gen_synthetic(n=100, dim=3, sigma=0.5, seed=0)
print("class counts:", np.bincount(data.labels))

config = TrainConfig(epochs=20, seed=0)
for family in (Family.REAL_AMPLITUDES, Family.STRONG_ENTANGLING):
    model = init_model(AnsatzSpec(family, 3, 3), classes=2, seed=0)
    model, metrics = train(model, data, config)
    print(f"{family.value:18s} test acc {metrics.accuracy:.2f}  train acc {metrics.train_accuracy:.2f}  "
          f"loss {metrics.loss_history[0]:.3f} -> {metrics.loss_history[-1]:.3f}")
