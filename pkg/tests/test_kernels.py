"""Parity tests: the compiled kernel and the pure-Python fallback must be
behaviorally identical, and the backend switch must respect the
INTERCEPTOR_KERNELS environment variable."""

import math
import os
import random
import subprocess
import sys

import numpy as np
import pytest

from interceptor import _kernels
from interceptor._kernels import _core_py

_core = pytest.importorskip("interceptor._kernels._core",
                            reason="compiled kernel not built")


def _random_pose(rng, span=12.0):
    return (rng.uniform(-span, span), rng.uniform(-span, span),
            rng.uniform(-math.pi, math.pi))


def test_word_tables_match():
    assert _core.WORDS == _core_py.WORDS
    assert _core.WORD_SEGMENTS == _core_py.WORD_SEGMENTS


def test_dubins_all_parity():
    rng = random.Random(101)
    for _ in range(500):
        s = _random_pose(rng)
        g = _random_pose(rng)
        r = rng.uniform(0.3, 4.0)
        a = _core.dubins_all(*s, *g, r)
        b = _core_py.dubins_all(*s, *g, r)
        for wa, wb in zip(a, b):
            assert (wa is None) == (wb is None)
            if wa is not None:
                for u, v in zip(wa, wb):
                    assert abs(u - v) < 1e-12


def test_dubins_best_parity():
    rng = random.Random(102)
    for _ in range(500):
        s = _random_pose(rng)
        g = _random_pose(rng)
        r = rng.uniform(0.3, 4.0)
        wa, *la = _core.dubins_best(*s, *g, r)
        wb, *lb = _core_py.dubins_best(*s, *g, r)
        assert wa == wb
        for u, v in zip(la, lb):
            assert abs(u - v) < 1e-12


def test_dubins_sample_parity():
    rng = random.Random(103)
    for _ in range(200):
        s = _random_pose(rng)
        g = _random_pose(rng)
        r = rng.uniform(0.5, 3.0)
        w, l0, l1, l2 = _core.dubins_best(*s, *g, r)
        total = l0 + l1 + l2
        for frac in (0.0, 0.2, 0.5, 0.8, 1.0):
            pa = _core.dubins_sample(s[0], s[1], s[2], w, l0, l1, l2, r,
                                     frac * total)
            pb = _core_py.dubins_sample(s[0], s[1], s[2], w, l0, l1, l2, r,
                                        frac * total)
            for u, v in zip(pa, pb):
                assert abs(u - v) < 1e-12


def test_roll_arc_parity():
    rng = random.Random(104)
    for _ in range(100):
        args = (rng.uniform(-5, 5), rng.uniform(-5, 5),
                rng.uniform(-math.pi, math.pi), rng.uniform(-0.6, 0.6),
                rng.uniform(0.5, 3.0), rng.uniform(0.5, 4.0), rng.randint(1, 8))
        a = _core.roll_arc(*args)
        b = _core_py.roll_arc(*args)
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0.0)


def test_rk4_parity():
    rng = random.Random(105)
    for _ in range(200):
        args = (rng.uniform(-5, 5), rng.uniform(-5, 5),
                rng.uniform(-math.pi, math.pi), rng.uniform(-0.5, 0.5),
                rng.uniform(0.0, 4.0), rng.uniform(-0.5, 0.5),
                rng.uniform(-1.0, 1.0), rng.uniform(0.01, 2.0),
                rng.uniform(0.5, 3.0), 0.6, 5.0, 0.01)
        a = _core.rk4_propagate(*args)
        b = _core_py.rk4_propagate(*args)
        for u, v in zip(a, b):
            assert abs(u - v) < 1e-12


def test_polygon_parity():
    rng = random.Random(106)
    from scipy.spatial import ConvexHull
    for _ in range(50):
        pts = np.array([[rng.uniform(-5, 5), rng.uniform(-5, 5)]
                        for _ in range(10)])
        verts = pts[ConvexHull(pts).vertices].astype(float)
        for _ in range(50):
            px, py = rng.uniform(-8, 8), rng.uniform(-8, 8)
            assert _core.poly_contains(px, py, verts) == \
                _core_py.poly_contains(px, py, verts)
            da = _core.poly_signed_distance(px, py, verts)
            db = _core_py.poly_signed_distance(px, py, verts)
            for u, v in zip(da, db):
                assert abs(u - v) < 1e-12


def test_batch_clearance_parity():
    rng = random.Random(107)
    from scipy.spatial import ConvexHull
    polys = []
    for _ in range(4):
        cx, cy = rng.uniform(-4, 4), rng.uniform(-4, 4)
        pts = np.array([[cx + rng.uniform(-2, 2), cy + rng.uniform(-2, 2)]
                        for _ in range(8)])
        polys.append(pts[ConvexHull(pts).vertices].astype(float))
    data = np.ascontiguousarray(np.vstack(polys))
    off = np.concatenate(([0], np.cumsum([len(p) for p in polys])))
    off = off.astype(np.int64)
    queries = np.array([[rng.uniform(-8, 8), rng.uniform(-8, 8)]
                        for _ in range(200)])
    a = _core.batch_clearance(queries, data, off)
    b = _core_py.batch_clearance(queries, data, off)
    assert np.allclose(a, b, rtol=0.0, atol=1e-12)
    # each row must agree with the single-polygon kernel minimum
    for i in range(0, 200, 10):
        best = min(_core.poly_signed_distance(queries[i, 0], queries[i, 1], p)[0]
                   for p in polys)
        assert abs(a[i, 0] - best) < 1e-12


def test_batch_clearance_no_polygons():
    queries = np.array([[1.0, 2.0], [3.0, 4.0]])
    for impl in (_core, _core_py):
        out = impl.batch_clearance(queries, np.zeros((0, 2)),
                                   np.zeros(1, dtype=np.int64))
        assert np.all(np.isinf(out[:, 0]))
        assert np.all(np.isnan(out[:, 1:]))


def test_dp_core_parity():
    rng = np.random.default_rng(109)
    for _ in range(120):
        nt = int(rng.integers(1, 10))
        ns = int(rng.integers(1, 12))
        table = rng.uniform(0.0, 5.0, (nt + 1, ns + 1))
        table[rng.uniform(size=table.shape) < 0.2] = np.inf
        table[0, 0] = rng.uniform(0.0, 5.0)
        table[nt, ns] = rng.uniform(0.0, 5.0)
        ds = float(rng.uniform(0.2, 1.0))
        dt = float(rng.uniform(0.3, 1.2))
        v0 = float(rng.uniform(0.0, 2.0))
        w_acc = float(rng.uniform(0.0, 3.0))
        v_max = float(rng.uniform(ds / dt, 5.0))
        ia, ta = _core.dp_core(table, ds, dt, v0, v_max, w_acc)
        ib, tb = _core_py.dp_core(table, ds, dt, v0, v_max, w_acc)
        assert np.array_equal(ia, ib)
        if math.isinf(ta):
            assert math.isinf(tb)
        else:
            assert abs(ta - tb) <= 1e-12 * max(1.0, abs(ta))


def test_backend_constant_reports_loaded_impl():
    assert _kernels.BACKEND in ("compiled", "python")
    if _kernels.BACKEND == "compiled":
        assert _kernels.dubins_best is _core.dubins_best


def test_env_override_forces_python_backend():
    env = dict(os.environ, INTERCEPTOR_KERNELS="py")
    out = subprocess.run(
        [sys.executable, "-c",
         "from interceptor import _kernels; print(_kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
