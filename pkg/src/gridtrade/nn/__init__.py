from .tensor import Tape, TapeReuseError, Tensor, set_finite_checks
from .layers import BiLSTM, Dense, GraphConv, LSTMCell, gcn_operator
from .optim import Adam, adam_step
from .gradcheck import grad_check
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "Tape", "TapeReuseError", "Tensor", "set_finite_checks",
    "BiLSTM", "Dense", "GraphConv", "LSTMCell", "gcn_operator",
    "Adam", "adam_step", "grad_check",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
]
