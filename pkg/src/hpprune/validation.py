"""Input validation helpers shared by the estimators and module functions."""

import numpy as np
from sklearn.utils import check_array


def as_filter_matrix(X, kernel_side: int) -> np.ndarray:
    """Validate a (n_filters, channels * kernel_side**2) weight matrix."""
    if kernel_side < 1:
        raise ValueError(f"kernel_side must be >= 1, got {kernel_side}")
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[0] < 1:
        raise ValueError("need at least one filter")
    if X.shape[1] % (kernel_side * kernel_side) != 0:
        raise ValueError(
            f"{X.shape[1]} features do not split into {kernel_side}x{kernel_side} kernels"
        )
    return X


def infer_channels(n_features: int, kernel_side: int) -> int:
    """Channel count implied by a flattened filter length."""
    area = kernel_side * kernel_side
    if n_features % area != 0:
        raise ValueError(f"{n_features} weights do not split into {area}-element kernels")
    return n_features // area
