# %% [markdown]
# # Side information: edge weights and directional projections
#
# A guide image `v` shares edges with the unknown. From its gradient we build
# a scalar edge weight `w` (small across edges) and the matrix field `D`,
# which shrinks gradient components parallel to the guide's gradient.

# %%
import tempfile
from pathlib import Path

import numpy as np

from structprior.bench.phantom import generate_phantom_pair
from structprior.fields import Grid, write_image
from structprior.sideinfo import SideInformation

grid = Grid.square(64)
pair = generate_phantom_pair(grid, seed=0)
si = SideInformation.from_image(pair.v, grid, eta=0.1, gamma=1.0)

# %% [markdown]
# The guide is rescaled so that its largest gradient has unit length. The
# weight then lies in `(0, 1]`, equal to 1 in flat regions.

# %%
print("max |grad v| after scaling:", np.max(np.linalg.norm(si.grad_v, axis=-1)))
print("weight range:", si.w.min(), si.w.max())
print("fraction of pixels with w < 0.5:", np.mean(si.w < 0.5))

# %% [markdown]
# `D` annihilates (for `gamma = 1` and small `eta`) a vector parallel to
# `grad v` and leaves perpendicular vectors untouched.

# %%
gv = si.grad_v
perp = np.stack([-gv[..., 1], gv[..., 0]], axis=-1)
edge = np.linalg.norm(gv, axis=-1) > 0.5
print("|D grad v| / |grad v| on edges:",
      np.median(np.linalg.norm(si.apply_D(gv), axis=-1)[edge] / np.linalg.norm(gv, axis=-1)[edge]))
print("|D perp| / |perp| on edges:",
      np.median(np.linalg.norm(si.apply_D(perp), axis=-1)[edge]
                / np.linalg.norm(perp, axis=-1)[edge]))

# %%
out = Path(tempfile.mkdtemp())
write_image(pair.u_true, out / "u_true.pgm", (0.0, float(pair.u_true.max())))
write_image(pair.v, out / "v.pgm", (float(pair.v.min()), float(pair.v.max())))
write_image(si.w, out / "weight.pgm", (0.0, 1.0))
print("images written to", out)
