"""
Gates of the automaton and the single-site decay channel
=========================================================

Every row update is built from three small pieces: a two-site unitary on
neighbouring controls, an entangling decay gate between a control and its
target, and a swap that moves the result one row down.
"""

# %%
import numpy as np

from qca_critic.gates import (
    dissipation_superop,
    kraus_pair,
    local_gate,
    make_gate_params,
    two_site_unitary,
)

np.set_printoptions(precision=4, suppress=True)

# %%
# Two probabilities fix everything.  p1 is the chance that an occupied pair
# partner flips an empty site, p2 the per-step decay probability.
gp = make_gate_params(p1=0.5, p2=0.2)
print(gp)

# %%
# The branching unitary moves amplitude between |o*> and |**>.  Squaring the
# matrix element gives p1 / 2 because the occupied neighbour sits on one side.
u = two_site_unitary(gp)
print(u.real)
print("|<**|U|o*>|^2 =", abs(u[3, 1]) ** 2)

# %%
# Tracing out the target of the decay gate leaves two Kraus operators.
k_empty, k_filled = kraus_pair(gp)
print(k_empty, k_filled, sep="\n\n")
print("completeness:", np.abs(k_empty.conj().T @ k_empty + k_filled.conj().T @ k_filled - np.eye(2)).max())

# %%
# As a linear map on the flattened density matrix the channel is a 4x4 matrix.
# A maximally mixed site loses a fraction p2 of its occupation.
rho = np.eye(2) / 2
out = (dissipation_superop(gp) @ rho.reshape(4)).reshape(2, 2)
print(out.real)

# %%
# The full three-site gate (two controls, one target) is unitary and leaves
# the empty configuration untouched: the absorbing state stays absorbing.
g = local_gate(gp)
print("unitarity:", np.abs(g.conj().T @ g - np.eye(8)).max())
print("empty column:", g[:, 0].real)
