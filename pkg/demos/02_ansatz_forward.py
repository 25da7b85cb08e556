"""
Circuit templates
=================

Compile the two layered templates, inspect their instruction lists, and
run a batched forward pass.
"""

import numpy as np

from qtl.ansatz import AnsatzSpec, Family, build, forward, init_params

for family in (Family.REAL_AMPLITUDES, Family.STRONG_ENTANGLING):
    program = build(AnsatzSpec(family, layers=2, qubits=3))
    print(f"{family.value}: {program.free_param_count} free angles")
    for ins in program.instructions:
        print("   ", ins)

# re-uploading repeats the feature gates in every layer
program = build(AnsatzSpec(Family.STRONG_ENTANGLING, 3, 3, reuploading=True))
print("feature gate slots with re-uploading:", program.feature_gate_slots)

# a batch of 4 feature vectors in one call; output is (4, qubits)
rng = np.random.default_rng(1)
params = init_params(program, rng)
features = rng.uniform(0, np.pi / 2, (4, 3))
print("expectations:\n", np.round(forward(program, params, features), 4))

# the single-qubit template with all trainable angles zero and a
# pi/2 feature on the |1> input reads out exactly +1
sq = build(AnsatzSpec(Family.SINGLE_QUBIT, 1, 1, reuploading=True))
print("single-qubit check:", forward(sq, np.zeros(sq.param_shape), [0, 0, np.pi / 2], initial_state=1))
