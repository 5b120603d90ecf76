"""Central finite differences."""
import numpy as np


def central_diff_grad(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = step
        g.flat[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g


def central_diff_jac(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = step
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2.0 * step))
    return np.column_stack(cols)
