"""Train a FactorVAE on a structured occupancy set and list which subcarrier
bins each informative latent controls.

Run: python demos/latent_traversal.py [steps]
"""

import sys
import warnings

import numpy as np

from physpoof import dataset as dsm
from physpoof.metrics import latent_map, traversal_metric
from physpoof.nn import TrainConfig
from physpoof.vae import Vae, Variant, train_variant


def main(steps=3000):
    cfg = dsm.DatasetConfig(N=8, n1=16, pattern="choice",
                            pattern_params={"patterns": [[1, 3, 6], [1, 4, 6], [1, 4, 7]]})
    ds = dsm.build(cfg, 20_000, 0)
    vae = Vae(32, 16, (200, 400, 200), Variant.factor(5.0), rng=0, dtype=np.float32)
    hist = train_variant(vae, ds.X, TrainConfig(lr=5e-4, batch_size=100, steps=steps, seed=0))
    print(f"final loss {np.mean(hist.loss[-100:]):.2f}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lmap = latent_map(vae, ds.X, L=200)
    for j in lmap.informative:
        print(f"latent {j:2d} -> bins {lmap.bins[j]}")
    print(f"covered bins {lmap.covered_bins}")
    for eps in (0.5, 1.0):
        print(f"traversal score eps={eps}: {traversal_metric(vae, ds.X, L=200, eps=eps).S0:.1f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 3000)
