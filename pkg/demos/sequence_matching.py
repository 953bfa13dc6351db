# %% [markdown]
# # Single-frame vs sequence matching
#
# Two noisy traverses of the same synthetic route. Sparse SAD on 30 pixels
# alone is ambiguous; summing along the diagonal with L frames fixes most of it.

# %%
from sparsevpr.evaluate import pr_curve
from sparsevpr.harness import ExperimentConfig, choose_pixels, match_sparse, prepare
from sparsevpr.match import best_matches, sequence_convolve
from sparsevpr.synth import SynthWorld

cfg = ExperimentConfig(synth=SynthWorld(noise_rate=1.0), tolerance=10.0, J=30, sigma=4.0)
prep = prepare(cfg)
pixels = choose_pixels(prep, "variance", cfg.J, cfg.sigma, seed=0)
raw, _ = match_sparse(prep, pixels, L=1)
print("distance matrix:", raw.shape)

# %%
for L in (1, 3, 5, 9):
    seq = sequence_convolve(raw, L) if L > 1 else raw
    c = pr_curve(seq, prep.gt)
    print(f"L={L}: P@100R={c.p_at_100r:.3f} R@99P={c.r_at_99p:.3f}")

# %%
idx, score = best_matches(sequence_convolve(raw, 5))
print("first best matches:", idx[:12])
