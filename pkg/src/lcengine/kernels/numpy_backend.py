"""Pure-NumPy kernel fallback.

Per-cell operation order matches the Cython kernels exactly (multiply then
add, convolution taps in ascending k order), so both backends produce
bit-identical grids.
"""

import numpy as np


def add_const(acc, c):
    np.add(acc, c, out=acc)


def add_scaled(acc, c, x):
    np.add(acc, c * x, out=acc)


def add_product(acc, u, x):
    np.add(acc, u * x, out=acc)


def convolve_rows_into(out, em, kern):
    n_t = em.shape[1]
    for k in range(kern.shape[0]):
        target = out[:, k : k + n_t]
        np.add(target, kern[k] * em, out=target)
