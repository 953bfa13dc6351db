# %% [markdown]
# # Event frames and variance-guided pixel selection
#
# Build fixed-time frames from a synthetic traverse, look at the per-pixel
# variance, then draw a spatially spread pixel set from it.

# %%
import numpy as np

from sparsevpr.events import build_frames_fixed_count, build_frames_fixed_time
from sparsevpr.selection import select_pixels, select_random_pixels, selection_pmf, variance_map
from sparsevpr.synth import SynthWorld, synth_generate

world = SynthWorld(width=64, height=48, n_places=120)
stream, track = synth_generate(world, 1.0, 0)
print(f"{len(stream)} events over {stream.t[-1] / 1e6:.1f} s on a {stream.width}x{stream.height} sensor")

# %%
frames = build_frames_fixed_time(stream, 1_000_000).drop_partial()
print("fixed-tau frames:", frames.counts.shape, "events/frame:", frames.counts.sum(axis=(1, 2))[:8])

by_count = build_frames_fixed_count(stream, 10_000)
print("fixed-N frames:", by_count.counts.shape, "dropped:", by_count.remainder)
print("fixed-N durations (ms):", (by_count.durations[:8] / 1e3).round(1))

# %% [markdown]
# Pixels whose count changes a lot from frame to frame carry the most place
# information. The selection pmf is just the variance map normalized.

# %%
vm = variance_map(frames)
pmf = selection_pmf(vm)
print(f"variance range {vm.S.min():.2f} .. {vm.S.max():.2f}")

# %%
def mean_nn(px):
    xy = np.column_stack([px.u, px.v]).astype(float)
    d = np.sqrt(((xy[:, None] - xy[None]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1).mean()


suppressed = select_pixels(pmf, 50, sigma=4.0, seed=0)
uniform = select_random_pixels(world.width, world.height, 50, seed=0)
print(f"mean nearest-neighbour distance: suppressed {mean_nn(suppressed):.2f} px, uniform {mean_nn(uniform):.2f} px")
print("captured variance share:", round(float(pmf.p[suppressed.v, suppressed.u].sum()), 3),
      "vs", round(float(pmf.p[uniform.v, uniform.u].sum()), 3))
