# Predicting the right half of an image from the left half
#
# Synthetic 8x8 digits are flattened column by column, so the first 32
# values are the left four columns.  Models regress the right half; the
# PGM panels put prediction, baseline and truth side by side.

from pathlib import Path

import numpy as np

from hnnso import RunConfig, crossval, render_half_image, rmse
from hnnso.experiment import load_dataset

cfg = RunConfig(source="synth-digits", synth_d=300, k=3, seed=0,
                h_x1=2, h_x2=2, h_e=8, base_lr=0.003, lam=1.0,
                epochs_stage1=10, epochs_stage2=10, epochs_stage3=10, epochs_finetune=100,
                mlp_hidden=128, mlp_lr=0.1, mlp_lam=1.0, epochs_mlp=300, patience=30)
ds, _ = load_dataset(cfg)
print("inputs", ds.x.shape, "targets", ds.y.shape)

hnnso, mlp = crossval(ds, ["hnnso", "mlp"], cfg)
print("pooled RMSE  hnnso", round(rmse(hnnso.predictions, ds.y), 4), " mlp", round(rmse(mlp.predictions, ds.y), 4))

out = Path("half_image_renders")
out.mkdir(exist_ok=True)
for i in range(3):
    render_half_image(out / f"example-{i:03d}.pgm", ds.x[i], hnnso.predictions[i], ds.y[i], 8, 8,
                      right_baseline=mlp.predictions[i], value_range="raw")
print("wrote", sorted(p.name for p in out.glob("*.pgm")))
print(np.round(hnnso.predictions[0].reshape(4, 8).T, 2))
