"""
Gates and statevectors
======================

Build small registers, apply the encoding and trainable gates, and read
out Pauli-Z expectations. Qubit 0 is the least significant bit of the
basis index.
"""

import numpy as np

from qtl.statevec import apply_cnot, apply_single, basis_state, expect_z, gate_u, gate_v, new_zero_state

# a fresh two-qubit register is |00>
s = new_zero_state(2)
print("zero state:", s.amplitudes)

# the encoding gate carries a global phase e^{i phi} on top of a rotation
print("U(pi/4) =\n", np.round(gate_u(np.pi / 4), 4))

# rotating qubit 0 by pi/2 flips it, so <Z_0> goes from +1 to -1
flipped = apply_single(s, gate_u(np.pi / 2), 0)
print("<Z0> after U(pi/2):", expect_z(flipped, 0))

# CNOT copies the flip onto qubit 1
both = apply_cnot(flipped, 0, 1)
print("<Z0>, <Z1> after CNOT:", expect_z(both, 0), expect_z(both, 1))

# the two phase angles of V never change Z statistics on their own
v = gate_v(0.7, -1.2, 0.0)
print("<Z0> after a pure phase:", expect_z(apply_single(basis_state(1, 0), v, 0), 0))

# every gate is unitary to machine precision
t, g, p = np.random.default_rng(0).uniform(-np.pi, np.pi, (3, 1000))
vs = gate_v(t, g, p)
err = np.abs(np.conj(np.swapaxes(vs, 1, 2)) @ vs - np.eye(2)).max()
print(f"worst unitarity error over 1000 gates: {err:.1e}")
