"""The toy datasets: point clouds, procedural shapes and their style-shifted twins.

Run: python demos/02_toy_datasets.py [out_dir]
"""

import sys

import numpy as np

from varmia.data import (gen_gmm_dataset, gen_shape_dataset, save_dataset, split_members,
                         style_shift)

pts = gen_gmm_dataset(n=1000, d=2, K=4, seed=0)
print("gmm means:", np.round(pts.meta["means"], 3).tolist())

shapes = gen_shape_dataset(n=8, side=16, seed=0)
shifted = style_shift(shapes, seed=1, stripe_width=2)


def ascii_art(img):
    chars = " .:-=+*#%@"
    return "\n".join("".join(chars[min(9, int(v * 10))] for v in row) for row in img[0])


# same geometry, different rendering
for i in range(2):
    print(shapes.labels[i])
    left, right = ascii_art(shapes.samples[i]), ascii_art(shifted.samples[i])
    for a, b in zip(left.splitlines(), right.splitlines()):
        print(a, "   ", b)

split = split_members(shapes, seed=0)
print("members:", split.members.tolist(), "nonmembers:", split.nonmembers.tolist())

if len(sys.argv) > 1:
    print("saved to", save_dataset(shapes, sys.argv[1], split))
