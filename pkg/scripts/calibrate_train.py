"""Desk-scale training calibration: epoch timing and loss trajectories."""

import time

import numpy as np

from romae import autoencoder, datagen, grid, neural

base = grid.make_mesh(0.0, 1.0, 58)
ext = grid.extend_mesh(base, 0.05)
mesh_e = ext.extended_mesh()
print("extended mesh:", mesh_e.n, "pad", ext.pad)

t0 = time.time()
ts = datagen.build_training_set(
    10000, mesh_e, datagen.SampleMethod.TRIG, channels=1,
    params=datagen.TrigParams(), seed=0,
)
print(f"datagen: {time.time()-t0:.1f}s, var={ts.samples.var():.2f}")

spec = autoencoder.AutoencoderSpec((64, 1), 8)
net, enc_len = autoencoder.build(spec, seed=0)
n_params = sum(p.size for p in net.parameters())
print("params:", n_params)

cfg = neural.TrainConfig(
    max_epochs=30, batch_size=128, validation_split=0.2,
    target_val_loss=8e-4, patience=10, alpha=0.01, seed=0,
)
t0 = time.time()
net, hist = neural.train(net, ts, cfg)
wall = time.time() - t0
print(f"train: {hist.epochs} epochs in {wall:.1f}s ({wall/hist.epochs:.2f}s/epoch), "
      f"stop={hist.stop_reason.value}")
for i, (tr, vl) in enumerate(zip(hist.train_loss, hist.val_loss), 1):
    print(f"  epoch {i:3d}: train {tr:.3e}  val {vl:.3e}")
