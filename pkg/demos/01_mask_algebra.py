"""Build the attention mask for a two-object scene and look at its blocks."""
# %%
import numpy as np

from mdma_kit.harness.fixtures import two_column_layout
from mdma_kit.masks import BLOCK_NAMES, assemble

layout, masks = two_column_layout()
print(layout)  # 6 text, 2 objects x 2 motion tokens, one 2x2 frame
print(masks.astype(int))  # object 0 owns the left column, object 1 the right

# %%
# inference mask, rows/cols ordered text | motion | video
mask = assemble(layout, masks, "inference")
dense = mask.dense().astype(int)
for row in dense:
    print("".join(map(str, row)))

# %%
# the motion tokens of different objects never see each other
print("m2m all zero:", not mask.block("m2m").any())
for name in BLOCK_NAMES:
    print(name, mask.block(name).shape, int(mask.block(name).sum()))

# %%
# training opens text<->video and text<->text, the rest stays the same
train = assemble(layout, masks, "training").dense()
changed = np.argwhere(train != mask.dense())
print(len(changed), "entries opened for training")
