"""Dtypes shared by the compiled core and the numpy fallback."""
import numpy as np

# One COO nonzero; 16 bytes, laid out like the C struct in _core.pyx.
TRIPLET_DTYPE = np.dtype([("row", "<i4"), ("col", "<i4"), ("data", "<f8")])

# Accumulator for Gram entries, right-hand sides and the factorisation.
ACCUM_DTYPE = np.dtype(np.longdouble)


class PivotError(ArithmeticError):
    """Cholesky breakdown; ``index`` is the failing pivot."""

    def __init__(self, index: int, value: float):
        super().__init__(f"non-positive pivot {value!r} at index {index}")
        self.index = int(index)
        self.value = float(value)


def empty_triplets(n: int = 0) -> np.ndarray:
    return np.zeros(n, dtype=TRIPLET_DTYPE)
