"""Supervised parameter estimation followed by a spoofing BER sweep.

Run: python demos/spoof_ber.py [steps]
"""

import sys

import numpy as np

from physpoof import attack
from physpoof import dataset as dsm
from physpoof.nn import TrainConfig


def main(steps=1500):
    for pattern in ("ofdm", "random"):
        cfg = dsm.DatasetConfig(N=16, n1=32, pattern=pattern, snr_db=7.0)
        ds = dsm.build(cfg, 10_000, 0)
        models, _ = attack.train_supervised(ds, TrainConfig(lr=1e-4, batch_size=100, steps=steps))
        rep = attack.spoof_ber_eval(attack.Scenario(cfg, (0.0, 4.0, 8.0), "supervised", n_frames=500),
                                    models)
        print(f"{pattern:7s} occupancy error {rep.occupancy_error:.3f}")
        for row in rep.rows():
            print(f"  Eb/N0 {row['eb_n0_db']:4.1f} dB  spoofed BER {row['ber']:.4f}  "
                  f"baseline {row['baseline']:.4f}")
    print("analytic BPSK", np.round(attack.bpsk_ber([0.0, 4.0, 8.0]), 4).tolist())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1500)
