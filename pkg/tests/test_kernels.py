"""Parity checks between the compiled kernel core and the NumPy fallback."""

import numpy as np
import pytest

from cloudcast._kernels import _numpy as numpy_kernels

core = pytest.importorskip("cloudcast._kernels._core")


def random_planes(rng, h=24, w=20):
    img = rng.uniform(0, 255, (h, w)).astype(np.float32)
    u = rng.uniform(-3, 3, (h, w)).astype(np.float32)
    v = rng.uniform(-3, 3, (h, w)).astype(np.float32)
    return img, u, v


def test_warp_parity(rng):
    img, u, v = random_planes(rng)
    a = core.warp_bilinear(img, u, v)
    b = numpy_kernels.warp_bilinear(img, u, v)
    assert np.allclose(a, b, atol=1e-4)


def test_warp_identity_at_zero_flow(rng):
    img, _, _ = random_planes(rng)
    zero = np.zeros_like(img)
    assert np.array_equal(core.warp_bilinear(img, zero, zero), img)


def test_warp_clamps_at_borders(rng):
    img, _, _ = random_planes(rng, 8, 8)
    big = np.full_like(img, 100.0)
    out = core.warp_bilinear(img, big, big)
    assert np.allclose(out, img[-1, -1])


@pytest.mark.parametrize("radius", [1, 2, 3])
def test_median_parity(rng, radius):
    img, _, _ = random_planes(rng)
    a = core.median_filter(img, radius)
    b = numpy_kernels.median_filter(img, radius)
    assert np.array_equal(a, b)


def test_median_zero_radius_copies(rng):
    img, _, _ = random_planes(rng)
    out = core.median_filter(img, 0)
    assert np.array_equal(out, img)
    assert out is not img


@pytest.mark.parametrize("gamma", [0.0, 0.2])
def test_solve_warp_parity(rng, gamma):
    h, w = 24, 20
    i0 = rng.uniform(0, 255, (h, w)).astype(np.float32)
    i1 = np.roll(i0, 2, axis=1) + rng.normal(0, 1, (h, w)).astype(np.float32)
    i1 = np.ascontiguousarray(i1, dtype=np.float32)
    gy, gx = np.gradient(i1.astype(np.float64))
    gx = gx.astype(np.float32)
    gy = gy.astype(np.float32)

    def run(kernels):
        u = np.zeros((h, w), dtype=np.float32)
        v = np.zeros((h, w), dtype=np.float32)
        w_illum = np.zeros((h, w), dtype=np.float32) if gamma > 0 else None
        kernels.solve_warp(i0, i1, gx, gy, u, v, w_illum,
                           0.15, 0.3, 0.25, 0.01, gamma, 10, 30)
        return u, v

    u1, v1 = run(core)
    u2, v2 = run(numpy_kernels)
    assert np.allclose(u1, u2, atol=1e-4)
    assert np.allclose(v1, v2, atol=1e-4)
    assert np.abs(u1).max() > 0  # the solver actually moved


def test_estimate_flow_backend_agreement(rng, monkeypatch):
    from cloudcast.nowcast import tvl1

    img0 = rng.uniform(0, 1, (48, 48)).astype(np.float32)
    img1 = np.roll(img0, 1, axis=1)

    flow_core = tvl1.estimate_flow(img0, img1)

    monkeypatch.setattr(tvl1.kernels, "warp_bilinear", numpy_kernels.warp_bilinear)
    monkeypatch.setattr(tvl1.kernels, "median_filter", numpy_kernels.median_filter)
    monkeypatch.setattr(tvl1.kernels, "solve_warp", numpy_kernels.solve_warp)
    flow_np = tvl1.estimate_flow(img0, img1)

    assert np.allclose(flow_core.u, flow_np.u, atol=1e-3)
    assert np.allclose(flow_core.v, flow_np.v, atol=1e-3)
