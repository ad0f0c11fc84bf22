import sys
import time

import numpy as np

from romae import autoencoder, datagen, grid, neural

alpha = float(sys.argv[1])
base_filters = int(sys.argv[2])
epochs = int(sys.argv[3])
nsamp = int(sys.argv[4]) if len(sys.argv) > 4 else 10000
omega = float(sys.argv[5]) if len(sys.argv) > 5 else 10.0

base = grid.make_mesh(0.0, 1.0, 58)
ext = grid.extend_mesh(base, 0.05)
mesh_e = ext.extended_mesh()
ts = datagen.build_training_set(
    nsamp, mesh_e, datagen.SampleMethod.TRIG, channels=1,
    params=datagen.TrigParams(omega_max=omega), seed=0,
)
spec = autoencoder.AutoencoderSpec((64, 1), 8, base_filters=base_filters)
net, enc_len = autoencoder.build(spec, seed=0)
cfg = neural.TrainConfig(
    max_epochs=epochs, batch_size=128, target_val_loss=8e-4, patience=15,
    alpha=alpha, seed=0,
)
t0 = time.time()
net, hist = neural.train(net, ts, cfg)
wall = time.time() - t0
first_hit = next((i + 1 for i, v in enumerate(hist.train_loss) if v <= 1e-3), None)
print(f"alpha={alpha} bf={base_filters} N={nsamp} omega={omega}: "
      f"{hist.epochs} ep, {wall:.0f}s ({wall/hist.epochs:.2f}s/ep), "
      f"stop={hist.stop_reason.value}, final train={hist.train_loss[-1]:.2e} "
      f"val={hist.val_loss[-1]:.2e}, first<=1e-3 at ep {first_hit}")
for i in (4, 9, 19, 29, 39, 59, 79, 99):
    if i < hist.epochs:
        print(f"   ep{i+1}: train {hist.train_loss[i]:.2e} val {hist.val_loss[i]:.2e}")
