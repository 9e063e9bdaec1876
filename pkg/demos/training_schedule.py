# Layer-wise pretraining then joint fine-tuning
#
# Stage 1 fits the input layer, stage 2 a second tensor layer on its frozen
# outputs, stage 3 the label auto-encoder; fine-tuning then trains the whole
# stack through the auto-encoder with early stopping on a validation split.

from hnnso import Dataset, HnnsoConfig, fit_scaler, init, rmse, synth_structured
from hnnso.train import TrainConfig, TrainLog, carve_validation, finetune, pretrain

ds = synth_structured(seed=1, d=1000)
sx, sy = fit_scaler(ds.x), fit_scaler(ds.y)
scaled = Dataset(sx.apply(ds.x), sy.apply(ds.y))
fit_idx, val_idx = carve_validation(scaled.n, 0.1, seed=1)
fit, val = scaled.subset(fit_idx), scaled.subset(val_idx)

model = init(HnnsoConfig(ds.n_in, ds.m_out, h_x1=2, h_x2=2, h_e=8, seed=1))
model.scaler_x, model.scaler_y = sx, sy
cfg = TrainConfig(epochs_stage1=20, epochs_stage2=20, epochs_stage3=20, epochs_finetune=100,
                  base_lr=0.1, lam=1.0, patience=30, seed=1)

log = TrainLog()
pretrain(model, fit, cfg, val=val, log=log)
model, best = finetune(model, fit, cfg, val=val, log=log)

# The log holds one record per epoch and stage.

for line in log.lines[:3] + ["..."] + log.lines[-3:]:
    print(line)
print("best validation RMSE (original units)", round(best, 5))
print("validation RMSE after restore", round(rmse(model.predict_raw(sx.invert(val.x)), sy.invert(val.y)), 5))
