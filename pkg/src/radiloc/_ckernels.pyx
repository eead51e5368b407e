# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled counting kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


def glcm_counts(levels, int ng, int dy, int dx):
    cdef i64[:, :] L = np.ascontiguousarray(levels, dtype=np.int64)
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], y, x, yy, xx
    out_arr = np.zeros((ng, ng), dtype=np.int64)
    cdef i64[:, :] out = out_arr
    cdef i64 a, b
    for y in range(h):
        yy = y + dy
        if yy < 0 or yy >= h:
            continue
        for x in range(w):
            xx = x + dx
            if xx < 0 or xx >= w:
                continue
            a = L[y, x]
            b = L[yy, xx]
            if a > 0 and b > 0:
                out[a - 1, b - 1] += 1
                out[b - 1, a - 1] += 1
    return out_arr


def glrlm_counts(levels, int ng, int dy, int dx):
    cdef i64[:, :] L = np.ascontiguousarray(levels, dtype=np.int64)
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], y, x, py, px
    cdef Py_ssize_t cap = h if h > w else w
    work_arr = np.zeros((ng, cap), dtype=np.int64)
    cdef i64[:, :] work = work_arr
    cdef i64 lv, run, maxrun = 1
    for y in range(h):
        for x in range(w):
            lv = L[y, x]
            if lv == 0:
                continue
            py = y - dy
            px = x - dx
            if 0 <= py < h and 0 <= px < w and L[py, px] == lv:
                continue
            run = 0
            py = y
            px = x
            while 0 <= py < h and 0 <= px < w and L[py, px] == lv:
                run += 1
                py += dy
                px += dx
            work[lv - 1, run - 1] += 1
            if run > maxrun:
                maxrun = run
    return np.ascontiguousarray(work_arr[:, :maxrun])


cdef Py_ssize_t _flood(i64[:, :] L, int[:, :] lab, Py_ssize_t sy, Py_ssize_t sx,
                       int tag, int conn, Py_ssize_t[:] stack):
    """Flood-fill the region of L[sy, sx] with ``tag``; returns its pixel count."""
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1]
    cdef Py_ssize_t top = 0, size = 0, cy, cx, ny, nx, p
    cdef int oy, ox
    cdef i64 lv = L[sy, sx]
    lab[sy, sx] = tag
    stack[0] = sy * w + sx
    top = 1
    while top > 0:
        top -= 1
        p = stack[top]
        cy = p // w
        cx = p - cy * w
        size += 1
        for oy in range(-1, 2):
            for ox in range(-1, 2):
                if oy == 0 and ox == 0:
                    continue
                if conn == 4 and oy != 0 and ox != 0:
                    continue
                ny = cy + oy
                nx = cx + ox
                if ny < 0 or ny >= h or nx < 0 or nx >= w:
                    continue
                if lab[ny, nx] != 0 or L[ny, nx] != lv:
                    continue
                lab[ny, nx] = tag
                stack[top] = ny * w + nx
                top += 1
    return size


def glszm_counts(levels, int ng):
    cdef i64[:, :] L = np.ascontiguousarray(levels, dtype=np.int64)
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], y, x, size, maxsize = 1
    lab_arr = np.zeros((h, w), dtype=np.intc)
    cdef int[:, :] lab = lab_arr
    cdef Py_ssize_t[:] stack = np.empty(h * w, dtype=np.intp)
    work_arr = np.zeros((ng, h * w), dtype=np.int64)
    cdef i64[:, :] work = work_arr
    cdef int tag = 0
    for y in range(h):
        for x in range(w):
            if L[y, x] == 0 or lab[y, x] != 0:
                continue
            tag += 1
            size = _flood(L, lab, y, x, tag, 8, stack)
            work[L[y, x] - 1, size - 1] += 1
            if size > maxsize:
                maxsize = size
    return np.ascontiguousarray(work_arr[:, :maxsize])


def label_components(mask, int connectivity):
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    cdef i64[:, :] L = np.ascontiguousarray(mask, dtype=np.int64)
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], y, x
    lab_arr = np.zeros((h, w), dtype=np.intc)
    cdef int[:, :] lab = lab_arr
    cdef Py_ssize_t[:] stack = np.empty(max(h * w, 1), dtype=np.intp)
    cdef int tag = 0
    for y in range(h):
        for x in range(w):
            if L[y, x] == 0 or lab[y, x] != 0:
                continue
            tag += 1
            _flood(L, lab, y, x, tag, connectivity, stack)
    return lab_arr.astype(np.int32), int(tag)


def ngtdm_stats(levels, int ng, int delta):
    cdef i64[:, :] L = np.ascontiguousarray(levels, dtype=np.int64)
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], y, x, ny, nx
    cdef int oy, ox
    n_arr = np.zeros(ng, dtype=np.int64)
    s_arr = np.zeros(ng, dtype=np.float64)
    cdef i64[:] n = n_arr
    cdef double[:] s = s_arr
    cdef i64 lv, nb, nsum, ncnt
    cdef double avg, d
    for y in range(h):
        for x in range(w):
            lv = L[y, x]
            if lv == 0:
                continue
            nsum = 0
            ncnt = 0
            for oy in range(-delta, delta + 1):
                ny = y + oy
                if ny < 0 or ny >= h:
                    continue
                for ox in range(-delta, delta + 1):
                    nx = x + ox
                    if (oy == 0 and ox == 0) or nx < 0 or nx >= w:
                        continue
                    nb = L[ny, nx]
                    if nb > 0:
                        nsum += nb
                        ncnt += 1
            if ncnt == 0:
                continue
            avg = <double>nsum / <double>ncnt
            d = <double>lv - avg
            if d < 0:
                d = -d
            n[lv - 1] += 1
            s[lv - 1] += d
    return n_arr, s_arr


def gldm_counts(levels, int ng, int delta, i64 alpha):
    cdef i64[:, :] L = np.ascontiguousarray(levels, dtype=np.int64)
    cdef Py_ssize_t h = L.shape[0], w = L.shape[1], y, x, ny, nx
    cdef int oy, ox
    cdef Py_ssize_t ndep = (2 * delta + 1) * (2 * delta + 1)
    out_arr = np.zeros((ng, ndep), dtype=np.int64)
    cdef i64[:, :] out = out_arr
    cdef i64 lv, nb, dep, diff
    for y in range(h):
        for x in range(w):
            lv = L[y, x]
            if lv == 0:
                continue
            dep = 0
            for oy in range(-delta, delta + 1):
                ny = y + oy
                if ny < 0 or ny >= h:
                    continue
                for ox in range(-delta, delta + 1):
                    nx = x + ox
                    if (oy == 0 and ox == 0) or nx < 0 or nx >= w:
                        continue
                    nb = L[ny, nx]
                    if nb == 0:
                        continue
                    diff = nb - lv
                    if diff < 0:
                        diff = -diff
                    if diff <= alpha:
                        dep += 1
            out[lv - 1, dep] += 1
    return out_arr
