"""NumPy fallback for the compiled kernels in _kernels.pyx.

Selected at import by rankmin.sparse_ops when the extension is missing or
RANKMIN_PURE_PYTHON=1 is set.  Same contracts, same reduction order per
output row.
"""

import numpy as np


def masked_rowdot(rows, cols, a, b):
    """out[k] = dot(a[rows[k]], b[cols[k]])."""
    if len(rows) == 0:
        return np.empty(0, dtype=np.float64)
    return np.einsum("ij,ij->i", a[rows], b[cols])


def scatter_add_rows(tgt, src, s, b, n_out):
    """out[tgt[k]] += s[k] * b[src[k]] for every observation k."""
    out = np.zeros((n_out, b.shape[1]), dtype=np.float64)
    if len(tgt):
        np.add.at(out, tgt, s[:, None] * b[src])
    return out


def sum_sq(v):
    return float(np.dot(v, v))
