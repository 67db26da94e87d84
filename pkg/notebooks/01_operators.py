# %% [markdown]
# # Discrete operators and their adjoints
#
# Every linear map in the toolkit comes with an exact adjoint. This script
# checks the dot-product identity `<A x, y> = <x, A^T y>` for the gradient,
# the symmetrised gradient, the Radon projector and block averaging.

# %%
import numpy as np

from structprior.diffops import divergence, gradient, sym_divergence, sym_gradient
from structprior.fields import Grid
from structprior.forward import RadonGeometry, RadonTransform, SuperResGeometry, downsample, \
    upsample_adjoint, power_method

rng = np.random.default_rng(0)
grid = Grid.square(32)
u = rng.normal(size=grid.shape)

# %% [markdown]
# Forward differences pair with the negative backward-difference divergence.

# %%
p = rng.normal(size=grid.shape + (2,))
print("grad/div   ", np.vdot(gradient(u, grid.h), p), np.vdot(u, -divergence(p, grid.h)))

M = rng.normal(size=grid.shape + (2, 2))
print("symgrad    ", np.vdot(sym_gradient(p, grid.h), M), np.vdot(p, -sym_divergence(M, grid.h)))

# %% [markdown]
# The parallel-beam projector is stored as a sparse matrix, so its adjoint
# is the exact transpose.

# %%
radon = RadonTransform(grid, RadonGeometry(n_views=15, n_detectors=48))
s = rng.normal(size=radon.geometry.shape)
print("radon      ", np.vdot(radon(u), s), np.vdot(u, radon.adjoint(s)))

sr = SuperResGeometry(4)
y = rng.normal(size=sr.output_shape(grid.shape))
print("downsample ", np.vdot(downsample(u, sr), y), np.vdot(u, upsample_adjoint(y, sr)))

# %% [markdown]
# The step sizes of the solver need operator norms; the power method gives
# them. For block averaging the exact value is `1 / factor`.

# %%
print("|radon|    ", power_method(radon, radon.adjoint, grid.shape))
print("|down|     ", power_method(lambda a: downsample(a, sr), lambda b: upsample_adjoint(b, sr),
                                  grid.shape), "expected", 1 / sr.factor)
