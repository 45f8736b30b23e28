"""Frame-level senone classifiers with phoneme-posterior feedback.

A from-scratch numpy implementation of three related acoustic-model shapes:

- a plain feedforward baseline over spliced feature frames,
- a per-frame recurrent stacking network that feeds the compressed
  (monophone-level) posteriors of the previous k frames back as inputs,
- a multi-pass variant that reruns whole utterances, each pass reading the
  previous pass's compressed outputs.

Plus a seeded synthetic corpus generator and a CLI that ties generation,
training, and evaluation together deterministically.
"""

from .bpsn import BpsnConfig, bpsn_evaluate, bpsn_forward_utterance, bpsn_train_epoch
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .compression import SenoneMap, compress, load_map, one_hot_compress, save_map
from .corpus import (Corpus, SpliceConfig, Utterance, load_corpus, save_corpus,
                     splice, splice_all)
from .datagen import GenConfig, generate_corpus
from .errors import ConfigError, DataError, NumericError, StacknetError
from .nn import (DenseLayer, Mlp, TrainConfig, backward, build_mlp, cross_entropy,
                 forward, grad_check, sgd_step)
from .rdsn import (RdsnConfig, RdsnModel, RecurrentBuffer, rdsn_evaluate,
                   rdsn_forward_utterance, rdsn_train_epoch, warm_start)
from .training import EvalStats, baseline_train_epoch, evaluate_baseline

__version__ = "0.1.0"

__all__ = [
    "BpsnConfig", "bpsn_evaluate", "bpsn_forward_utterance", "bpsn_train_epoch",
    "Checkpoint", "load_checkpoint", "save_checkpoint",
    "SenoneMap", "compress", "load_map", "one_hot_compress", "save_map",
    "Corpus", "SpliceConfig", "Utterance", "load_corpus", "save_corpus",
    "splice", "splice_all",
    "GenConfig", "generate_corpus",
    "ConfigError", "DataError", "NumericError", "StacknetError",
    "DenseLayer", "Mlp", "TrainConfig", "backward", "build_mlp",
    "cross_entropy", "forward", "grad_check", "sgd_step",
    "RdsnConfig", "RdsnModel", "RecurrentBuffer", "rdsn_evaluate",
    "rdsn_forward_utterance", "rdsn_train_epoch", "warm_start",
    "EvalStats", "baseline_train_epoch", "evaluate_baseline",
    "__version__",
]
