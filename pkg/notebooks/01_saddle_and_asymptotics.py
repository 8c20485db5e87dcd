# %% [markdown]
# # Saddle points and partition-function asymptotics
#
# For an energy phi the one-particle equilibrium law is ``C exp(-z0 phi(v))``.
# Here we solve for z0 for the two built-in energies and compare the
# leading-order asymptotics of the partition function with exact values.

# %%
import math
from pathlib import Path

import numpy as np

from kacchaos import energy, equilibrium, io

OUT = Path(__file__).with_name("figures")

# %%
for name in ("classical", "relativistic"):
    sol = equilibrium.solve_z0(energy.get_energy(name))
    print(f"{name:13s} z0={sol.z0:.10f} integral={sol.integral_value:.6f} C={sol.C:.6f}")

# %% [markdown]
# The relativistic integral is about 4.082 and its reciprocal C about 0.245.
# Both numbers show up in the literature under the same letter, so the
# package reports them separately.
#
# Three normalizations of the leading term are candidates.  The classical
# energy has an exact answer (a sphere surface area), which picks one.

# %%
name, errs = equilibrium.select_prefactor(50)
print("selected:", name, {k: f"{v:.2%}" for k, v in errs.items()})

# %%
cl = energy.classical()
Ns = np.array([10, 25, 50, 100, 200, 400])
rel_err = [abs(math.exp(equilibrium.z_asymptotic(cl, int(N)).log
                        - equilibrium.z_exact_classical(int(N)).log) - 1) for N in Ns]
for N, r in zip(Ns, rel_err):
    print(f"N={N:4d} relative error {r:.4%}")
# error decays like 1/N
print("N * error:", np.round(Ns * np.array(rel_err), 4))

# %%
io.write_text(OUT / "asymptotic_error.svg", io.line_chart(
    {"|Z_asym / Z_exact - 1|": (Ns.tolist(), rel_err, None)},
    title="classical asymptotics", xlabel="N", ylabel="relative error", logx=True))

# %% [markdown]
# For small N the convolution oracle gives Z directly; for the relativistic
# energy the ratio to the asymptotic value tends to 1 slowly.

# %%
rel = energy.relativistic()
for N in range(2, 7):
    brute = equilibrium.z_bruteforce(rel, N, float(N))
    asym = equilibrium.z_asymptotic(rel, N)
    print(f"N={N} asymptotic/brute = {math.exp(asym.log - brute.log):.4f}")
