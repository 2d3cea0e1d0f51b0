# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled LCS length; same contract as ``_lcs_py.lcs_length``."""

from libc.stdlib cimport malloc, free


def lcs_length(list a, list b):
    cdef Py_ssize_t n, m, i, j
    cdef long *xa
    cdef long *xb
    cdef int *prev
    cdef int *cur
    cdef int *tmp
    cdef int left, up
    if len(a) < len(b):
        a, b = b, a
    n = len(a)
    m = len(b)
    if m == 0:
        return 0
    xa = <long *> malloc(n * sizeof(long))
    xb = <long *> malloc(m * sizeof(long))
    prev = <int *> malloc((m + 1) * sizeof(int))
    cur = <int *> malloc((m + 1) * sizeof(int))
    if not xa or not xb or not prev or not cur:
        free(xa); free(xb); free(prev); free(cur)
        raise MemoryError()
    try:
        for i in range(n):
            xa[i] = a[i]
        for j in range(m):
            xb[j] = b[j]
        for j in range(m + 1):
            prev[j] = 0
        cur[0] = 0
        for i in range(n):
            left = 0
            for j in range(m):
                if xa[i] == xb[j]:
                    left = prev[j] + 1
                else:
                    up = prev[j + 1]
                    if up > left:
                        left = up
                cur[j + 1] = left
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(xa); free(xb); free(prev); free(cur)
