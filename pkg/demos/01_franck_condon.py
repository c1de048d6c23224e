"""Franck-Condon tables for the two axial modes and what they imply for cooling.

Run: python3 demos/01_franck_condon.py
"""
import numpy as np

from ioncool.fock import ModeSpec, displacement_matrix, kick_operator, lamb_dicke_from_com
from ioncool.spectrum import StateDistribution, density_of_states, resonance_spectrum

# Lamb-Dicke parameters: the stretch mode is stiffer by sqrt(3), so its eta is smaller
for eta0 in (0.1, 0.6):
    lds = lamb_dicke_from_com(eta0)
    print(f"eta_com = {lds.eta_com:.3f}  eta_rel = {lds.eta_rel:.4f}")

# Carrier strength |<n|D|n>|^2 of the stretch mode at eta_com = 0.6.
# Levels 6 and 7 sit close to a zero of the Laguerre polynomial.
d = displacement_matrix(lamb_dicke_from_com(0.6).eta_rel, 14)
carrier = np.diag(d.probabilities)
for n, c in enumerate(carrier[:10]):
    flag = "  <- nearly dark" if c < 0.02 else ""
    print(f"n_rel={n}:  |<n|D|n>|^2 = {c:.4f}{flag}")

# the kick on ion 2 differs from ion 1 only by a parity flip of the stretch mode
modes = ModeSpec.two_ion(6, 5)
lds = lamb_dicke_from_com(0.6)
k1 = kick_operator(modes, lds, 1).matrix
k2 = kick_operator(modes, lds, 2).matrix
print("ion-1 and ion-2 kicks share |elements|:", np.allclose(abs(k1), abs(k2)))

# Density of states: incommensurate frequencies give no degeneracies, (1, 2) does
h = density_of_states(ModeSpec.two_ion(30, 20), 20.0, 1 / 3)
print("states below E=20 for (1, sqrt 3):", int(h.values.sum()), " max per bin:", int(h.values.max()))
h = density_of_states(ModeSpec(30, 20, 1.0, 2.0), 20.0, 1 / 3)
print("states below E=20 for (1, 2):     ", int(h.values.sum()), " max per bin:", int(h.values.max()))

# resonance spectrum of a warm crystal: sidebands grow with eta^2
modes = ModeSpec.two_ion(18, 14)
dist = StateDistribution.thermal(modes, energy_per_mode=7.5)
for eta0 in (0.1, 0.6):
    spec = resonance_spectrum(modes, lamb_dicke_from_com(eta0), dist, (-3, 3), 0.1)
    red, blue = spec.value_at(-1.0), spec.value_at(1.0)
    print(f"eta_com={eta0}: carrier {spec.value_at(0.0):.3f}, COM red sideband {red:.3f}, blue {blue:.3f}")
