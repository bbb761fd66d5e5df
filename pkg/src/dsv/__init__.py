"""Label-free selection of augmentation hyperparameters for self-supervised anomaly detectors."""

from dsv.errors import DegenerateError, DSVError, PreconditionError, RunFormatError, ValidationError
from dsv.geometry import projected_norm, set_distance
from dsv.loss import LossBreakdown, l_dis_hat, l_sep_hat, l_val
from dsv.harness import CandidateModel, SelectionRun, run_selection

__version__ = "0.1.0"

__all__ = [
    "CandidateModel", "DSVError", "DegenerateError", "LossBreakdown", "PreconditionError",
    "RunFormatError", "SelectionRun", "ValidationError", "l_dis_hat", "l_sep_hat", "l_val",
    "projected_norm", "run_selection", "set_distance",
]
