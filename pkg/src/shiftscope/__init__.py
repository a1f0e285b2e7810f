"""shiftscope: attribute-shift detection at desk scale.

A small dense classifier with explicit forward/backward passes, a composite
training objective (cross-entropy + class-separation + feature-entropy
terms), five in-distribution scorers, the detection-metric suite, synthetic
shifted-data generators, and the shifted-data-free hyperparameter selection
procedure. See the CLI (`shiftscope --help`) for end-to-end experiments.
"""

from .analysis import (PcaModel, ScoreLandscape, confidence_curve, pca_fit,
                       pca_project, score_landscape,
                       write_pca_projection_csv)
from .data import (CsvFormatError, LabeledDataset, SynthConfig, gen_id,
                   gen_nas, gen_shift_sequence, read_csv, read_features_csv,
                   write_csv, write_features_csv)
from .hyperparam import (SweepGrid, SweepRecord, SweepResult, harmonic_mean,
                         residual_singular_mass, select_hyperparams)
from .losses import (BatchStats, DegenerateBatchError, LossBreakdown,
                     LossConfig, batch_stats, cross_entropy, distance_loss,
                     entropy_loss, entropy_terms, total_loss)
from .metrics import (METRIC_NAMES, aupr, auroc, compute_metric,
                      detection_accuracy, tnr_at_tpr)
from .net import (DenseNet, ForwardTrace, GradientSet, backward, forward,
                  init_net, load_net, save_net)
from .scorers import (SCORER_NAMES, GramBounds, MahalanobisModel, OdinConfig,
                      fit_gram, fit_mahalanobis, fit_scorer, load_gram,
                      load_mahalanobis, save_gram, save_mahalanobis,
                      score_energy, score_gram, score_gram_trace,
                      score_mahalanobis, score_mahalanobis_trace, score_msp,
                      score_odin, select_layers)
from .train import OptConfig, TrainLog, accuracy, train

__version__ = "0.1.0"
