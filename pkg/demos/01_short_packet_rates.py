"""How much rate do short packets cost?

Compares the Shannon rate with the finite-blocklength normal approximation
for a few blocklengths, then shows the SINR each device needs to hit a
1 bit/s/Hz target at error probability 1e-9.
"""

import numpy as np

from mimo_urllc.fbl import a_coeff, rate_fbl, sinr_threshold

K, eps = 10, 1e-9
sinr_db = np.array([0, 5, 10, 15, 20])
gamma = 10 ** (sinr_db / 10)

print("SINR [dB]  " + "  ".join(f"{d:>6}" for d in sinr_db))
for L in (50, 100, 200, 1000):
    beta = K / L
    shannon = (1 - beta) * np.log2(1 + gamma)
    fbl = rate_fbl(gamma, beta, L, eps)
    print(f"L={L:<5} loss " + "  ".join(f"{s - f:6.3f}" for s, f in zip(shannon, fbl)))

print("\nSINR needed for 1 bit/s/Hz (pilot overhead K/L included):")
for L in (50, 100, 200, 1000):
    beta = K / L
    th = float(sinr_threshold(1.0, beta, a_coeff(eps, L, K)))
    shannon_th = 2 ** (1 / (1 - beta)) - 1
    print(f"  L={L:<5} finite blocklength {10 * np.log10(th):5.2f} dB   Shannon {10 * np.log10(shannon_th):5.2f} dB")
