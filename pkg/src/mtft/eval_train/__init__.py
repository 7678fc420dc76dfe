from .ablation import ABLATION_COLUMNS, AblationRow, run_ablation, write_ablation
from .metrics import MISS_THRESHOLD_M, MetricReport, compute_metrics, default_horizons
from .training import (
    Adam,
    Evaluation,
    TrainConfig,
    TrainingError,
    TrainResult,
    eval_masks,
    evaluate,
    loss,
    train,
    write_loss_curve,
    write_predictions,
)
