"""t-product tensor algebra, tensor CUR decomposition, and low-rank adapters."""

from .adapter import (
    Adapter,
    LayerWeights,
    ParamReport,
    StackingConfig,
    count_matrix_baseline,
    count_params,
    delta,
    effective_weights,
    init_adapter,
    merge,
    stack_layers,
    unstack_layers,
)
from .checkpoint import read_checkpoint, write_checkpoint
from .decomp import (
    MatrixCurFactors,
    TcurFactors,
    column_scores,
    matrix_cur,
    matrix_cur_reconstruct,
    reconstruct,
    row_scores,
    select_top_r,
    tcur,
)
from .errors import (
    CheckpointError,
    CorruptCheckpoint,
    DimMismatch,
    DivergenceDetected,
    RankOutOfRange,
    ResidualImaginary,
    TcurError,
    UnsupportedVersion,
    ZeroReference,
    ZeroTensor,
)
from .report import ComparisonReport, ReportRecord
from .tensor_ops import (
    fft_mode3,
    fro_norm,
    ifft_mode3,
    rel_error,
    tidentity,
    tpinv,
    tprod,
    tprod_bruteforce,
    ttranspose,
)
from .trainer import (
    SyntheticTask,
    TrainHistory,
    finite_diff_grad,
    grad_core,
    hessian_max_eig,
    make_task,
    run_baselines,
    safe_step_size,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Adapter",
    "CheckpointError",
    "ComparisonReport",
    "CorruptCheckpoint",
    "DimMismatch",
    "DivergenceDetected",
    "LayerWeights",
    "MatrixCurFactors",
    "ParamReport",
    "RankOutOfRange",
    "ReportRecord",
    "ResidualImaginary",
    "StackingConfig",
    "SyntheticTask",
    "TcurError",
    "TcurFactors",
    "TrainHistory",
    "UnsupportedVersion",
    "ZeroReference",
    "ZeroTensor",
    "column_scores",
    "count_matrix_baseline",
    "count_params",
    "delta",
    "effective_weights",
    "fft_mode3",
    "finite_diff_grad",
    "fro_norm",
    "grad_core",
    "hessian_max_eig",
    "ifft_mode3",
    "init_adapter",
    "make_task",
    "matrix_cur",
    "matrix_cur_reconstruct",
    "merge",
    "read_checkpoint",
    "reconstruct",
    "rel_error",
    "row_scores",
    "run_baselines",
    "safe_step_size",
    "select_top_r",
    "stack_layers",
    "tcur",
    "tidentity",
    "tpinv",
    "tprod",
    "tprod_bruteforce",
    "train",
    "ttranspose",
    "unstack_layers",
    "write_checkpoint",
]
