"""Spectrum, resonance order and the Fermi golden rule coefficient for the default potential.

Run: python demos/resonance_and_gamma.py
"""

from dnlslab.harness import default_potential
from dnlslab.resonance import classify_resonance, gamma_closed_form, gamma_oracle, leading_G
from dnlslab.spectral import discrete_spectrum

V = default_potential(1000)
spec = discrete_spectrum(V)
print("eigenvalues below the band [0, 4]:", spec.eigenvalues)

rep = classify_resonance(spec)
print(f"N0 = {rep.N0}, omega_* = {rep.omega_star:.6f}, xi_* = {rep.xi_star:.6f}")

# G = phi_1^(N0-1) phi_2^N0 projected onto the continuous subspace
G = leading_G(spec, rep.N0)
closed = gamma_closed_form(G, rep, V)
via_lap = gamma_oracle(G, rep, V)
print(f"Gamma (distorted Fourier) = {closed:.10e}")
print(f"Gamma (outgoing resolvent) = {via_lap:.10e}")
print(f"relative gap = {abs(closed - via_lap) / closed:.2e}")
