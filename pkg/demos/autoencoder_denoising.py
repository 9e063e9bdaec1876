# Tied gated auto-encoder as a label denoiser
#
# The structured-output block is trained alone on target vectors: two
# independently masked copies feed the encoder, the decoder rebuilds the
# clean vector.  Afterwards it should undo masking on labels it never saw.

import numpy as np

from hnnso import HnnsoConfig, Rng, fit_scaler, gae_forward, init, rmse, synth_structured
from hnnso.noise import corrupt
from hnnso.train import TrainConfig, train_autoencoder

ds = synth_structured(seed=0)
sy = fit_scaler(ds.y[:1500])
y_train, y_held = sy.apply(ds.y[:1500]), sy.apply(ds.y[1500:])

model = init(HnnsoConfig(n_in=ds.n_in, m_out=ds.m_out, h_e=8, seed=0))
train_autoencoder(model, y_train, TrainConfig(epochs_stage3=300, base_lr=0.1, corruption_p=0.25))

# Mask a quarter of every held-out label vector twice and reconstruct.

rng = Rng(1000)
c1, k1 = corrupt(y_held, 0.25, rng)
c2, k2 = corrupt(y_held, 0.25, rng)
out, _ = gae_forward(model.ae, c1, c2, k1, k2)

print("corrupted vs clean     RMSE", round(rmse(c1, y_held), 4))
print("reconstructed vs clean RMSE", round(rmse(out, y_held), 4))

# Where entries were masked, the reconstruction fills them from the others.

hidden = k1 == 0
print("masked entries: mean |error| before", np.abs(y_held[hidden]).mean().round(4),
      "after", np.abs(out[hidden] - y_held[hidden]).mean().round(4))
