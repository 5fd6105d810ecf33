"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension is selected at import when available; otherwise the
numpy implementation is used. Both produce identical results (see
tests/test_kernels.py and benchmarks/bench_kernels.py).
"""

import numpy as np

from . import _numpy

try:
    from . import _native as _impl

    BACKEND = "native"
except ImportError:  # extension not built
    _impl = _numpy
    BACKEND = "numpy"


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def ray_aabb(origins, dirs, bmin, bmax):
    return _impl.ray_aabb(_as_f64(origins), _as_f64(dirs), _as_f64(bmin), _as_f64(bmax))


def count_in_ball(points, center, radius):
    return _impl.count_in_ball(_as_f64(points), _as_f64(center), float(radius))


def halfspace_inside(points, normals, offsets, tol=0.0):
    return _impl.halfspace_inside(
        _as_f64(points), _as_f64(normals), _as_f64(offsets), float(tol)
    )


def ray_convex_interval(origins, dirs, normals, offsets):
    return _impl.ray_convex_interval(
        _as_f64(origins), _as_f64(dirs), _as_f64(normals), _as_f64(offsets)
    )


def voxel_indices(points, origin, size):
    return _impl.voxel_indices(_as_f64(points), _as_f64(origin), float(size))
