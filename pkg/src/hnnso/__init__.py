"""High-order neural networks with structured output (HNNSO).

Bilinear tensor layers stacked under a tied gated auto-encoder that learns
dependencies between output dimensions, plus MLP and ridge baselines and a
cross-validation harness.
"""

from .errors import ContractError, FormatError, HnnsoError, NumericalError, ShapeError, ValidationError
from .linalg import Rng, bilinear_slices, contract_13, derive_seed, jacobi_eigensym
from .layers import BilinearTensorLayer, GatedAutoencoder, bilinear_backward, bilinear_forward, gae_backward, gae_forward
from .model import HnnsoConfig, HnnsoModel, init, load_model, predict, save_model
from .optim import AdaGradState, adagrad_step, l2_penalty, sse_loss
from .train import TrainConfig, finetune, kfold_split, pretrain
from .data import Dataset, fit_scaler, load_csv, load_idx, pca_fit, split_half_image, synth_digits, synth_structured
from .baselines import mlp_train, ridge_fit
from .evaluation import EvalReport, relative_error_reduction, render_half_image, render_report, rmse
from .config import RunConfig, load_config
from .experiment import crossval, run_experiment

__version__ = "0.1.0"
