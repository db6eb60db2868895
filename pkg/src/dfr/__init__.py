"""Deep feature registration for unsupervised domain adaptation on precomputed features."""
from .errors import ConfigurationError, DataError, DFRError, NumericError, StorageError
from .kernels import BACKEND
from .network import NetworkParams, init_params, load_checkpoint, save_checkpoint
from .registration import RegistrationConfig, register_features, registration_loss
from .histmatch import HistogramConfig, histogram_loss, soft_histogram
from .pseudolabel import compute_class_centers, select_pseudo_labels
from .trainer import TrainConfig, ablation_suite, evaluate, train

__version__ = "0.1.0"
