"""Pure-numpy pair-interaction kernel (fallback for the compiled one)."""

import numpy as np


def apply_pair(X, W, out):
    """Accumulate a two-particle block operator into ``out``.

    Parameters
    ----------
    X : complex ndarray, shape (A, Mx, Mz, B, Mx, Mz, C)
        Values on the z grid; the two interacting particles are axes 1-2
        and 4-5.
    W : float ndarray, shape (Mz, Mz, Mx*Mx, Mx*Mx)
        For each pair of z nodes ``(p, q)`` the matrix acting on the joint
        x-mode index ``a_i * Mx + a_j``.
    out : complex ndarray, same shape as ``X``
        Updated in place with ``out += W X``.
    """
    A, Mx, Mz, B, _, _, C = X.shape
    Y = X.transpose(2, 5, 0, 3, 6, 1, 4).reshape(Mz, Mz, A * B * C, Mx * Mx)
    Wt = W.transpose(0, 1, 3, 2)
    Z = np.matmul(Y.real, Wt) + 1j * np.matmul(Y.imag, Wt)
    out += Z.reshape(Mz, Mz, A, B, C, Mx, Mx).transpose(2, 5, 0, 3, 6, 1, 4)
