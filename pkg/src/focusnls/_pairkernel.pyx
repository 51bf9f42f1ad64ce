# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pair-interaction kernel; see ``_pairkernel_py.apply_pair``.

For every outer index and z-node pair the ``Mx*Mx`` joint x amplitudes are
gathered into a contiguous buffer and multiplied by the real block
``W[p, q]``; real and imaginary parts are accumulated separately.
"""

from libc.stdlib cimport malloc, free


def apply_pair(const double complex[:, :, :, :, :, :, ::1] X,
               const double[:, :, :, ::1] W,
               double complex[:, :, :, :, :, :, ::1] out):
    cdef Py_ssize_t A = X.shape[0], Mx = X.shape[1], Mz = X.shape[2]
    cdef Py_ssize_t B = X.shape[3], C = X.shape[6]
    cdef Py_ssize_t M2 = Mx * Mx
    # element strides of the C-contiguous 7-D layout
    cdef Py_ssize_t s5 = C
    cdef Py_ssize_t s4 = Mz * s5
    cdef Py_ssize_t s3 = Mx * s4
    cdef Py_ssize_t s2 = B * s3
    cdef Py_ssize_t s1 = Mz * s2
    cdef Py_ssize_t s0 = Mx * s1
    cdef const double *xp = <const double *> &X[0, 0, 0, 0, 0, 0, 0]
    cdef double *op = <double *> &out[0, 0, 0, 0, 0, 0, 0]
    cdef const double *wp = &W[0, 0, 0, 0]
    cdef Py_ssize_t a, b, c, p, q, r, s, base, off
    cdef double accr, acci, w
    cdef const double *wrow
    cdef Py_ssize_t *offs = <Py_ssize_t *> malloc(M2 * sizeof(Py_ssize_t))
    cdef double *bre = <double *> malloc(M2 * sizeof(double))
    cdef double *bim = <double *> malloc(M2 * sizeof(double))
    if offs == NULL or bre == NULL or bim == NULL:
        free(offs); free(bre); free(bim)
        raise MemoryError()
    for r in range(M2):
        offs[r] = (r // Mx) * s1 + (r % Mx) * s4
    try:
        with nogil:
            for a in range(A):
                for p in range(Mz):
                    for b in range(B):
                        for q in range(Mz):
                            wrow = wp + (p * Mz + q) * M2 * M2
                            for c in range(C):
                                base = a * s0 + p * s2 + b * s3 + q * s5 + c
                                for s in range(M2):
                                    off = 2 * (base + offs[s])
                                    bre[s] = xp[off]
                                    bim[s] = xp[off + 1]
                                for r in range(M2):
                                    accr = 0.0
                                    acci = 0.0
                                    for s in range(M2):
                                        w = wrow[r * M2 + s]
                                        accr = accr + w * bre[s]
                                        acci = acci + w * bim[s]
                                    off = 2 * (base + offs[r])
                                    op[off] += accr
                                    op[off + 1] += acci
    finally:
        free(offs)
        free(bre)
        free(bim)
