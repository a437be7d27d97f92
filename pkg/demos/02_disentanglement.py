"""Perturb one object's motion tokens and watch the other object's outputs."""
# %%
import numpy as np

from mdma_kit.harness.fixtures import leak_fixture
from mdma_kit.harness.probe import leak_probe
from mdma_kit.masks import assemble

layout, masks, tokens = leak_fixture(42)
mask = assemble(layout, masks)

# %%
# blocked logits set to -inf: nothing crosses
for mode in ("neg_inf", "mul_probs", "mul_logits"):
    leak = max(leak_probe(tokens, mask, j, trials=20, seed=j, mode=mode)
               for j in range(layout.n_objects))
    print(f"{mode:>10}: max output change {leak:.3g}")

# %%
# multiplying the logits by 0 leaves exp(0) weight on blocked keys
ones = np.ones((layout.total, layout.total), dtype=bool)
print("no mask at all:", leak_probe(tokens, mask, 0, trials=20, dense=ones))
