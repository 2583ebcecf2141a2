# Copyright 2016 Mario Graff Guerrero

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.



import numpy as np
from nose.tools import assert_almost_equals, assert_raises
from test_root import wavy_strip


def test_green():
    from SplashSqueeze.potential import green, green_gradient
    assert abs(green([np.pi, 0.0])) < 1e-15
    assert_almost_equals(green([0.0, 5.0]), np.log(np.sinh(2.5)) / np.pi, places=12)
    assert_almost_equals(green([0.7, 0.2]), green([0.7 + 2 * np.pi, 0.2]), places=12)
    x = np.array([0.4, -0.3])
    eps = 1e-6
    fd = [(green(x + e) - green(x - e)) / (2 * eps) for e in [np.array([eps, 0]), np.array([0, eps])]]
    np.testing.assert_allclose(green_gradient(x), fd, atol=1e-8)


def test_green_far_field():
    from SplashSqueeze.potential import green
    # |x2| / (2 pi) - log 2 / pi plus exponentially small terms, no overflow
    assert_almost_equals(green([1.0, 800.0]), 800 / (2 * np.pi) - np.log(2) / np.pi, places=8)


def test_kernel_singular():
    from SplashSqueeze.potential import kernel
    from SplashSqueeze.utils import SingularPointError
    with assert_raises(SingularPointError):
        kernel([2 * np.pi, 0.0])
    k = kernel([1.0, 0.5])
    np.testing.assert_allclose(k.K, k.HilbK)


def test_single_layer_flat():
    from SplashSqueeze.potential import single_layer
    from SplashSqueeze.curve import flat_line
    c = flat_line(64, 0.3)
    S = single_layer(c, check_resolution=True)
    assert S.kind == 'SingleLayer'
    for k in range(1, 20):
        f = np.cos(k * c.theta)
        np.testing.assert_allclose(S.dot(f), -f / k, atol=1e-10)
        np.testing.assert_allclose(S(np.sin(k * c.theta)), -np.sin(k * c.theta) / k, atol=1e-10)


def test_single_layer_resolution():
    from SplashSqueeze.potential import single_layer
    from SplashSqueeze.curve import circle
    from SplashSqueeze.utils import ResolutionError
    single_layer(circle(64, 0.5), check_resolution=True)
    c = wavy_strip(8, amplitude=0.4, height=0.6)
    with assert_raises(ResolutionError):
        single_layer(c, check_resolution=True, tol=1e-14)


def test_single_layer_continuity():
    from SplashSqueeze.potential import single_layer, evaluate_potential
    from SplashSqueeze.curve import circle
    c = circle(64, 0.5)
    f = 1 + np.cos(c.theta)
    on = single_layer(c).dot(f)
    for e in [2e-3, -2e-3]:
        v = evaluate_potential(c, f, c.points * (1 - e))
        np.testing.assert_allclose(v, on, atol=5e-3)


def test_double_layer_flat():
    from SplashSqueeze.potential import double_layer_T, adjoint_double_layer
    from SplashSqueeze.curve import flat_line
    c = flat_line(32)
    np.testing.assert_allclose(double_layer_T(c).matrix, 0, atol=1e-14)
    np.testing.assert_allclose(adjoint_double_layer(c).matrix, 0, atol=1e-14)


def test_double_layer_circle():
    from SplashSqueeze.potential import double_layer_T, evaluate_potential
    from SplashSqueeze.curve import circle
    c = circle(64, 0.5)
    f = np.ones(64)
    np.testing.assert_allclose(double_layer_T(c).dot(f), -1, atol=1e-10)
    v = evaluate_potential(c, f, [[0.0, 0.0], [0.1, 0.2], [0.0, 2.0], [1.5, 0.0]], layer='double')
    np.testing.assert_allclose(v, [-2, -2, 0, 0], atol=1e-9)


def test_jump_constant():
    from SplashSqueeze.potential import jump_constant, measure_jump, double_layer_T
    from SplashSqueeze.curve import ellipse
    c = jump_constant()
    assert_almost_equals(c, 1.0, places=4)
    e = ellipse(128, 1.0, 0.6)
    f = np.cos(e.theta) + 0.5
    below, above = measure_jump(e, f, 5, 1e-4)
    assert_almost_equals((below - above) / (2 * f[5]), c, places=3)
    Tf = double_layer_T(e).dot(f)
    assert_almost_equals(below, (c * f + Tf)[5], places=3)


def test_evaluate_potential_near_field():
    from SplashSqueeze.potential import evaluate_potential
    from SplashSqueeze.curve import flat_line
    c = flat_line(64)
    f = np.cos(c.theta)
    x1 = np.array([0.3, -1.1, 2.0])
    for y in [1e-3, -1e-3, 0.5]:
        pts = np.vstack([x1, np.full(3, y)]).T
        v, g = evaluate_potential(c, f, pts, gradient=True)
        np.testing.assert_allclose(v, -np.cos(x1) * np.exp(-abs(y)), atol=1e-8)
        np.testing.assert_allclose(g[:, 1], np.sign(y) * np.cos(x1) * np.exp(-abs(y)), atol=1e-7)


def test_evaluate_potential_errors():
    from SplashSqueeze.potential import evaluate_potential
    from SplashSqueeze.curve import flat_line
    from SplashSqueeze.utils import ValidationError, SingularPointError
    c = flat_line(16)
    f = np.ones(16)
    with assert_raises(ValidationError):
        evaluate_potential(c, f, [[0, 1]], layer='triple')
    with assert_raises(ValidationError):
        evaluate_potential(c, f, [[0, 1]], layer='double', gradient=True)
    with assert_raises(SingularPointError):
        evaluate_potential(c, f, [c.points[3]])


def test_upsample_cap_warning():
    import logging
    from SplashSqueeze.potential import evaluate_potential
    from SplashSqueeze.curve import flat_line
    try:
        from mock import MagicMock
    except ImportError:
        from unittest.mock import MagicMock
    c = flat_line(16)
    logger = logging.getLogger('SplashSqueeze')
    warning = logger.warning
    logger.warning = MagicMock()
    evaluate_potential(c, np.ones(16), [[0.1, 1e-9]], upsample_cap=64)
    assert logger.warning.called
    logger.warning = warning


def test_boundary_operator():
    import tempfile
    import os
    from SplashSqueeze.potential import single_layer, BoundaryOperator
    from SplashSqueeze.utils import StaleCacheError, ValidationError
    c = wavy_strip(16)
    S = single_layer(c)
    assert S.n == 16
    assert S.check(c) is S
    with assert_raises(StaleCacheError):
        S.check(wavy_strip(16, amplitude=0.2))
    with assert_raises(ValidationError):
        BoundaryOperator('Unknown', np.eye(2), None)
    fname = tempfile.mktemp() + '.json'
    S.save(fname)
    S2 = BoundaryOperator.load(fname)
    os.unlink(fname)
    assert S2.kind == 'SingleLayer' and S2.curve_id == c.curve_id
    np.testing.assert_allclose(S2.matrix, S.matrix)


def test_cross_operators():
    from SplashSqueeze.potential import cross_single_layer, cross_gradient, evaluate_potential
    from SplashSqueeze.curve import circle
    c = circle(64, 0.3, center=(0.0, 1.0))
    f = np.cos(c.theta) + 1
    pts = np.array([[1.0, -1.0], [-2.0, 0.5]])
    np.testing.assert_allclose(np.dot(cross_single_layer(c, pts), f), evaluate_potential(c, f, pts),
                               atol=1e-12)
    assert cross_gradient(c, pts).shape == (2, 64, 2)


def test_single_layer_symmetry():
    from SplashSqueeze.potential import single_layer
    c = wavy_strip(64)
    w = c.speed() * c.h
    A = single_layer(c).matrix / w[np.newaxis, :]
    np.testing.assert_allclose(A, A.T, atol=1e-10)


def test_potential_harmonic():
    from SplashSqueeze.potential import evaluate_potential
    from SplashSqueeze.curve import circle
    c = circle(64, 0.5)
    f = 1 + np.cos(c.theta) + 0.3 * np.sin(2 * c.theta)
    e = 1e-4
    for x in [np.array([0.1, 0.05]), np.array([1.2, 0.3])]:
        pts = np.array([x, x + [e, 0], x - [e, 0], x + [0, e], x - [0, e]])
        for layer in ['single', 'double']:
            v = evaluate_potential(c, f, pts, layer=layer)
            lap = (v[1:].sum() - 4 * v[0]) / e ** 2
            assert abs(lap) < 1e-6


def test_operators_self_convergence():
    from SplashSqueeze.potential import single_layer, double_layer_T
    c = wavy_strip(64)
    fine = c.resample(128)
    f = np.cos(c.theta) + 0.3 * np.sin(2 * c.theta)
    g = np.cos(fine.theta) + 0.3 * np.sin(2 * fine.theta)
    np.testing.assert_allclose(single_layer(c).dot(f), single_layer(fine).dot(g)[::2], atol=1e-8)
    np.testing.assert_allclose(double_layer_T(c).dot(f), double_layer_T(fine).dot(g)[::2], atol=1e-8)
