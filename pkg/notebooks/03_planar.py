# %% [markdown]
# # Planar collisions with fixed momentum
#
# In two dimensions a collision must keep both the pair energy and the pair
# momentum.  For phi(r) = r^2 the allowed set is a circle and the move is
# exact; otherwise a radius is solved for and a Metropolis step accounts
# for the co-area factor.

# %%
from pathlib import Path

import numpy as np

from kacchaos import io, planar

OUT = Path(__file__).with_name("figures")
rng = np.random.default_rng(3)

# %%
for name in ("classical", "relativistic"):
    sad = planar.solve_z0_2d(planar.planar_energy(name))
    print(f"{name:13s} z0={sad.z0:.10f} C2={sad.C2:.6f} hessian_det={sad.hessian_det:.4f}")
# relativistic z0 solves 2 z^2 + z - 2 = 0
print("closed form:", (17 ** 0.5 - 1) / 4)

# %%
for N in (25, 50, 100, 200):
    ratio = np.exp(planar.z_asymptotic_2d("classical", N).log
                   - planar.z_exact_planar_classical(N).log)
    print(f"N={N:4d} asymptotic/exact = {ratio:.4f}")

# %%
pe = planar.planar_energy("relativistic")
sad = planar.solve_z0_2d(pe)
run = planar.sample_planar(pe, 200, (0.0, 0.0), sad, 200_000, rng, pool=40_000)
print("component KS", round(run.component.ks, 4), "radial KS", round(run.radial.ks, 4),
      "acceptance", round(run.acceptance_ratio, 3))
print("energy residual", run.max_energy_residual, "momentum residual", run.max_momentum_residual)

# %%
law = planar.PlanarLaw(pe, sad)
v = run.state.velocities.ravel()
grid_pdf = lambda x: np.gradient(law.component_cdf(x), x)  # noqa: E731
io.write_text(OUT / "planar_component.svg",
              io.histogram_overlay(v, grid_pdf, title="relativistic planar, final state"))
