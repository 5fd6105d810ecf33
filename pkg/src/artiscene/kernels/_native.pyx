# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; arithmetic mirrors kernels._numpy exactly."""

from libc.math cimport INFINITY, floor

import numpy as np

cimport numpy as cnp

cnp.import_array()


def ray_aabb(const double[:, ::1] origins, const double[:, ::1] dirs,
             const double[::1] bmin, const double[::1] bmax):
    cdef Py_ssize_t n = origins.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] t_out = out
    cdef Py_ssize_t i, k
    cdef double tlo, thi, o, d, t1, t2, lo, hi, t
    cdef bint ok
    for i in range(n):
        tlo = -INFINITY
        thi = INFINITY
        ok = True
        for k in range(3):
            o = origins[i, k]
            d = dirs[i, k]
            if d == 0.0:
                if o < bmin[k] or o > bmax[k]:
                    ok = False
            else:
                t1 = (bmin[k] - o) / d
                t2 = (bmax[k] - o) / d
                if t1 < t2:
                    lo = t1
                    hi = t2
                else:
                    lo = t2
                    hi = t1
                if lo > tlo:
                    tlo = lo
                if hi < thi:
                    thi = hi
        t = tlo if tlo >= 0.0 else thi
        if (not ok) or thi < tlo or thi < 0.0:
            t = INFINITY
        t_out[i] = t
    return out


def count_in_ball(const double[:, ::1] points, const double[::1] center, double radius):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t i, count = 0
    cdef double dx, dy, dz, r2 = radius * radius
    for i in range(n):
        dx = points[i, 0] - center[0]
        dy = points[i, 1] - center[1]
        dz = points[i, 2] - center[2]
        if dx * dx + dy * dy + dz * dz <= r2:
            count += 1
    return count


def halfspace_inside(const double[:, ::1] points, const double[:, ::1] normals,
                     const double[::1] offsets, double tol):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t nf = normals.shape[0]
    out = np.ones(n, dtype=bool)
    cdef cnp.uint8_t[::1] inside = out.view(np.uint8)
    cdef Py_ssize_t i, f
    cdef double dot
    for i in range(n):
        for f in range(nf):
            dot = (points[i, 0] * normals[f, 0]
                   + points[i, 1] * normals[f, 1]
                   + points[i, 2] * normals[f, 2])
            if dot > offsets[f] + tol:
                inside[i] = 0
                break
    return out


def ray_convex_interval(const double[:, ::1] origins, const double[:, ::1] dirs,
                        const double[:, ::1] normals, const double[::1] offsets):
    cdef Py_ssize_t n = origins.shape[0]
    cdef Py_ssize_t nf = normals.shape[0]
    lo_out = np.empty(n, dtype=np.float64)
    hi_out = np.empty(n, dtype=np.float64)
    cdef double[::1] tlo_v = lo_out
    cdef double[::1] thi_v = hi_out
    cdef Py_ssize_t i, f
    cdef double tlo, thi, num, den, tt
    for i in range(n):
        tlo = -INFINITY
        thi = INFINITY
        for f in range(nf):
            num = offsets[f] - (origins[i, 0] * normals[f, 0]
                                + origins[i, 1] * normals[f, 1]
                                + origins[i, 2] * normals[f, 2])
            den = (dirs[i, 0] * normals[f, 0]
                   + dirs[i, 1] * normals[f, 1]
                   + dirs[i, 2] * normals[f, 2])
            if den < 0.0:
                tt = num / den
                if tt > tlo:
                    tlo = tt
            elif den > 0.0:
                tt = num / den
                if tt < thi:
                    thi = tt
            elif num < 0.0:
                thi = -INFINITY
        tlo_v[i] = tlo
        thi_v[i] = thi
    return lo_out, hi_out


def voxel_indices(const double[:, ::1] points, const double[::1] origin, double size):
    cdef Py_ssize_t n = points.shape[0]
    out = np.empty((n, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] idx = out
    cdef Py_ssize_t i, k
    for i in range(n):
        for k in range(3):
            idx[i, k] = <cnp.int64_t>floor((points[i, k] - origin[k]) / size)
    return out
