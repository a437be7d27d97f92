"""Compare flow fields by their magnitude and direction histograms."""
# %%
import numpy as np

from mdma_kit.harness.metrics import flow_fidelity

full = np.ones((6, 6), dtype=bool)
right = np.broadcast_to([1.0, 0.0], (6, 6, 2))
print("same flow:    ", flow_fidelity(right, right, full, full))
print("reversed flow:", flow_fidelity(right, -right, full, full))  # magnitudes agree, directions don't

# %%
rng = np.random.default_rng(0)
noisy = right + 0.3 * rng.standard_normal((6, 6, 2))
print("noisy copy:   ", round(flow_fidelity(noisy, right, full, full), 3))

# %%
# a rotation field against a translation field
ys, xs = np.mgrid[0:6, 0:6] - 2.5
swirl = np.stack([-ys, xs], axis=-1)
print("swirl vs right:", round(flow_fidelity(swirl, right, full, full), 3))
