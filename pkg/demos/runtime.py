# %% [markdown]
# # Runtime of sparse vs all-pixel matching
#
# One query against 500 reference frames on a 346x260 sensor.

# %%
from sparsevpr.harness import ExperimentConfig, bench_runtime

for J in (50, 150, 500):
    t = bench_runtime(ExperimentConfig(J=J), write=False).timing
    print(f"J={J:>4}: sparse {t['sparse_median_s'] * 1e3:.3f} ms, dense {t['dense_median_s'] * 1e3:.1f} ms, "
          f"{t['speedup']:.0f}x")
