"""Per-class binary RBMs with a free-energy soft-max readout.

The package trains one restricted Boltzmann machine per class with
single-step contrastive divergence, then classifies by comparing class
free energies through fitted soft-max offsets. Around that core it ships
the full pipeline: row normalization and threshold binarization, labeled
CSV handling, stratified splitting, a synthetic dataset generator,
evaluation metrics, and a reproducible command-line driver.
"""

from .classifier import (
    ClassEnsemble,
    OffsetFitConfig,
    fit_offsets,
    load_ensemble,
    predict_label,
    predict_label_batch,
    predict_proba,
    predict_proba_batch,
    save_ensemble,
    train_ensemble,
)
from .dataset import (
    LabeledDataset,
    SplitSpec,
    SynthSpec,
    load_csv,
    save_csv,
    split,
    synth_generate,
)
from .errors import (
    ConvergenceError,
    CsvParseError,
    DegenerateInputError,
    FormatError,
    MissingColumnError,
    SizeLimitError,
    ValidationError,
)
from .markov import (
    SeededRng,
    StateDistribution,
    TransitionMatrix,
    bernoulli,
    equilibrium_vector,
    is_regular,
    transition_power,
)
from .metrics import EvalReport, evaluate
from .preprocess import (
    BinarizationRule,
    Scope,
    binarize,
    l2_normalize,
    minmax,
    normalize_rows,
    preprocess_pipeline,
)
from .rbm import (
    GradientEstimate,
    RbmParams,
    TrainConfig,
    cd1,
    energy,
    exact_log_likelihood,
    exact_log_partition_function,
    exact_partition_function,
    free_energy,
    free_energy_batch,
    hidden_probs,
    load_rbm,
    reconstruction_error,
    sample_bits,
    save_rbm,
    sigmoid,
    train_rbm,
    visible_probs,
)

__version__ = "0.1.0"

__all__ = [
    "BinarizationRule",
    "ClassEnsemble",
    "ConvergenceError",
    "CsvParseError",
    "DegenerateInputError",
    "EvalReport",
    "FormatError",
    "GradientEstimate",
    "LabeledDataset",
    "MissingColumnError",
    "OffsetFitConfig",
    "RbmParams",
    "Scope",
    "SeededRng",
    "SizeLimitError",
    "SplitSpec",
    "StateDistribution",
    "SynthSpec",
    "TrainConfig",
    "TransitionMatrix",
    "ValidationError",
    "bernoulli",
    "binarize",
    "cd1",
    "energy",
    "equilibrium_vector",
    "evaluate",
    "exact_log_likelihood",
    "exact_log_partition_function",
    "exact_partition_function",
    "fit_offsets",
    "free_energy",
    "free_energy_batch",
    "hidden_probs",
    "is_regular",
    "l2_normalize",
    "load_csv",
    "load_ensemble",
    "load_rbm",
    "minmax",
    "normalize_rows",
    "predict_label",
    "predict_label_batch",
    "predict_proba",
    "predict_proba_batch",
    "preprocess_pipeline",
    "reconstruction_error",
    "sample_bits",
    "save_csv",
    "save_ensemble",
    "save_rbm",
    "sigmoid",
    "split",
    "synth_generate",
    "train_ensemble",
    "train_rbm",
    "transition_power",
    "visible_probs",
]
