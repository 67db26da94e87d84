# %% [markdown]
# # Comparing the regulariser catalogue
#
# For each family (H1, TV, TGV) and each test problem we tune the
# regularisation strength over a log grid and keep the best PSNR. The
# structure-guided variants should beat the plain ones, with the
# directional variant ahead of the edge-weighted one. Takes a few minutes.

# %%
from structprior.bench.experiment import CASES, FAMILIES, ExperimentConfig, tuned_table

for case in CASES:
    kinds = [k for fam in FAMILIES.values() for k in fam] + ["JTV"]
    table = tuned_table(ExperimentConfig(case=case), kinds)
    print(case)
    for fam, kinds in FAMILIES.items():
        cells = "  ".join(f"{k:5s} {table[k].psnr:6.2f} dB (alpha {table[k].alpha:.3g})"
                          for k in kinds)
        print("  ", cells)
    print(f"   JTV   {table['JTV'].psnr:6.2f} dB (alpha {table['JTV'].alpha:.3g})")
