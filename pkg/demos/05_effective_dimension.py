"""
Local effective dimension
=========================

Train each template once, then estimate the normalized local effective
dimension over a grid of sample sizes n.
"""

import numpy as np

from qtl.ansatz import AnsatzSpec, Family
from qtl.data import gen_synthetic
from qtl.effdim import EffDimConfig, local_effective_dimension
from qtl.hybrid import TrainConfig, init_model, prepare, fit

data = gen_synthetic(100, 3, 0.5, seed=0)
config = TrainConfig(epochs=20, seed=0)

print("n        " + "  ".join(f"{f.value:>18s}" for f in (Family.REAL_AMPLITUDES, Family.STRONG_ENTANGLING)))
models = {}
for family in (Family.REAL_AMPLITUDES, Family.STRONG_ENTANGLING):
    model, train_set, _ = prepare(init_model(AnsatzSpec(family, 3, 3), 2, seed=0), data, config)
    models[family] = fit(model, train_set, config)[0]

for n in (10**3, 10**4, 10**5, 10**6):
    ec = EffDimConfig(n, samples=64)
    values = [local_effective_dimension(m, data, ec).normalized for m in models.values()]
    print(f"1e{int(np.log10(n))}     " + "  ".join(f"{v:18.3f}" for v in values))
