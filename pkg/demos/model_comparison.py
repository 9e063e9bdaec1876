# Cross-validated comparison with the baselines
#
# crossval runs every model kind on one shared fold plan, fitting scalers on
# each training fold and scoring held-out rows in original units.

from hnnso import RunConfig, crossval, render_report
from hnnso.experiment import load_dataset

cfg = RunConfig(source="synth-structured", synth_d=600, k=3, seed=2,
                h_x1=2, h_x2=2, h_e=8, base_lr=0.1, lam=1.0,
                epochs_stage1=10, epochs_stage2=10, epochs_stage3=10, epochs_finetune=60,
                mlp_hidden=32, mlp_lr=0.1, mlp_lam=0.01, epochs_mlp=200, patience=20)
ds, _ = load_dataset(cfg)
reports = crossval(ds, ["hnnso", "mlp", "ridge"], cfg)
table, _ = render_report(reports, reference="hnnso")
print(table)

# Same folds without pretraining, to see what the staged start buys.

(plain,) = crossval(ds, ["hnnso"], cfg.updated({"pretrain": False}))
print(plain.model, round(plain.mean_rmse, 5))
