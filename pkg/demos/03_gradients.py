"""
Parameter-shift gradients
=========================

The trainable generators have eigenvalues +-1, so shifting a single angle by
pi/4 in each direction gives the exact derivative. Compare with central
differences.
"""

import numpy as np

from qtl.ansatz import AnsatzSpec, Family, build, init_params
from qtl.grad import finite_diff_grad, shift_rule_grad

program = build(AnsatzSpec(Family.STRONG_ENTANGLING, 2, 3))
rng = np.random.default_rng(2)
params = init_params(program, rng)
features = rng.uniform(0, np.pi / 2, 3)

exact = shift_rule_grad(program, params, features, observable=0)
approx = finite_diff_grad(program, params, features, observable=0, h=1e-5)
print("shift rule   :", np.round(exact[:6], 6))
print("finite diff  :", np.round(approx[:6], 6))
print(f"relative error: {np.linalg.norm(exact - approx) / np.linalg.norm(exact):.1e}")

# for tiny components the central difference itself becomes the noisy side
small = np.argsort(np.abs(exact))[:3]
for i in small:
    print(f"component {i}: shift {exact[i]: .3e}  fd {approx[i]: .3e}")
