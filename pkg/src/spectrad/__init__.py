"""Sparse-first DAG structure learning with a spectral-radius bound."""

from .sparse import (
    SparseMatrix,
    from_coo,
    from_dense,
    read_matrix_market,
    topological_order,
    write_matrix_market,
)
from .acyclicity import (
    BoundConfig,
    BoundTrace,
    PowerIterationError,
    backward_gradient,
    finite_difference_gradient,
    forward_bound,
    g_exact,
    gradient_check,
    h_exact,
    spectral_radius_dense,
)
from .learner import (
    LearnConfig,
    LearnResult,
    NumericsError,
    TraceRecord,
    inner,
    least,
    loss_and_grad,
    post_threshold,
)
from .datagen import (
    GraphCase,
    assign_weights,
    generate_case,
    load_case,
    random_dag,
    sample_lsem,
    save_case,
)
from .evaluation import (
    EvalReport,
    auc_roc,
    compare_graphs,
    grid_search,
    grid_search_detailed,
    is_dag,
    trace_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "SparseMatrix", "from_coo", "from_dense", "read_matrix_market",
    "write_matrix_market", "topological_order",
    "BoundConfig", "BoundTrace", "PowerIterationError", "forward_bound",
    "backward_gradient", "finite_difference_gradient", "gradient_check",
    "h_exact", "g_exact", "spectral_radius_dense",
    "LearnConfig", "LearnResult", "NumericsError", "TraceRecord",
    "inner", "least", "loss_and_grad", "post_threshold",
    "GraphCase", "random_dag", "assign_weights", "sample_lsem",
    "generate_case", "save_case", "load_case",
    "EvalReport", "compare_graphs", "auc_roc", "grid_search",
    "grid_search_detailed", "trace_correlation", "is_dag",
    "__version__",
]
