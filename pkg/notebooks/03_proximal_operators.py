# %% [markdown]
# # Proximal operators and the Moreau identity
#
# Each functional exposes `prox` and `conj_prox`. The two are tied by
# `prox_F(z) + prox_{F*}(z) = z` at step 1, which we check numerically, and
# the nuclear-norm prox is compared with soft-thresholding of an SVD.

# %%
import numpy as np

from structprior.prox import GroupL1, NonnegIndicator, NuclearL1, QuadraticFidelity, \
    RobustL1Fidelity, SquaredNorm

rng = np.random.default_rng(1)
data = rng.normal(size=(16, 16))
cases = {
    "squared norm": (SquaredNorm(2.0), rng.normal(size=(16, 16))),
    "quadratic fidelity": (QuadraticFidelity(data), rng.normal(size=(16, 16))),
    "L1 fidelity": (RobustL1Fidelity(data), rng.normal(size=(16, 16))),
    "nonnegativity": (NonnegIndicator(), rng.normal(size=(16, 16))),
    "group L1": (GroupL1(0.5), rng.normal(size=(16, 16, 2))),
    "nuclear L1": (NuclearL1(0.5), rng.normal(size=(16, 16, 2, 2))),
}
for name, (F, z) in cases.items():
    err = np.max(np.abs(F.prox(z, 1.0) + F.conj_prox(z, 1.0) - z))
    print(f"{name:20s} Moreau residual {err:.1e}")

# %% [markdown]
# Nuclear-norm prox against a direct SVD for a single 2x2 block.

# %%
Mat = rng.normal(size=(2, 2))
U, s, Vt = np.linalg.svd(Mat)
direct = U @ np.diag(np.maximum(s - 0.3, 0)) @ Vt
print("nuclear prox vs SVD:", np.max(np.abs(NuclearL1(1.0).prox(Mat[None], 0.3)[0] - direct)))
