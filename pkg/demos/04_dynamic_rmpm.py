"""Stop re-propagating once the masks stop changing between denoising steps."""
# %%
from mdma_kit.harness.scenario import generate_scenario
from mdma_kit.rmpm import DynamicState, dynamic_update

scene = generate_scenario(11, steps=10, noise=1.0, converge_step=3)
print("noise per step:", scene.noise_schedule)

# %%
state = DynamicState(alpha=0.05)
for step, feats in enumerate(scene.features_per_step, start=1):
    before = state.propagation_calls
    tracks, state = dynamic_update(state, step, feats, scene.first_masks, W=2)
    fresh = state.propagation_calls > before and step > 1
    diff = f"{state.differences[-1]:.3f}" if fresh else "-"
    print(f"step {step:2d}  calls={state.propagation_calls}  frozen={state.frozen}  diff={diff}")

# %%
print(f"{state.propagation_calls} propagations instead of {len(scene.features_per_step)}")
