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
from test_root import wavy_strip, splash_strip, random_band_limited


def test_single_layer_solver():
    from SplashSqueeze.fieldop import SingleLayerSolver
    c = wavy_strip(64)
    solver = SingleLayerSolver(c)
    g = np.cos(c.theta) + 0.3
    sigma, C = solver.solve(g, total=0.25)
    np.testing.assert_allclose(solver.single_layer.dot(sigma) + C, g, atol=1e-11)
    assert_almost_equals(np.dot(solver.weights, sigma), 0.25, places=11)
    assert solver.condition() < 1e6


def test_operator_cache():
    from SplashSqueeze.fieldop import OperatorCache
    from SplashSqueeze.potential import single_layer
    cache = OperatorCache()
    c = wavy_strip(32)
    S = cache.get(c, 'S', single_layer)
    assert cache.get(c, 'S', lambda x: None) is S
    d = wavy_strip(32, amplitude=0.2)
    assert cache.get(d, 'S', single_layer) is not S


def test_dtn_flat():
    from SplashSqueeze.fieldop import dtn_minus, dtn_plus, n_res
    from SplashSqueeze.curve import flat_line
    c = flat_line(64, 1.0)
    Nm = dtn_minus(c)
    Np = dtn_plus(c, delta=1.0)
    R = n_res(c)
    for k in range(1, 24):
        f = np.cos(k * c.theta)
        np.testing.assert_allclose(Nm.dot(f), k * f, atol=1e-8)
        np.testing.assert_allclose(Np.dot(f), -k * f, atol=1e-8)
        np.testing.assert_allclose(R.dot(f), 0, atol=1e-8)
    np.testing.assert_allclose(Nm.dot(np.ones(64)), 0, atol=1e-10)


def test_dtn_pair_sum():
    from SplashSqueeze.fieldop import dtn_pair
    c = wavy_strip(64)
    P = dtn_pair(c, delta=1.0)
    f = random_band_limited(64, kmax=10)
    np.testing.assert_allclose(P.n_plus.dot(f) + P.n_minus.dot(f), P.n_res.dot(f), atol=1e-9)


def test_cancellation():
    from SplashSqueeze.command_line import growth_exponent
    from SplashSqueeze.fieldop import dtn_minus, n_res, SingleLayerSolver
    from SplashSqueeze.potential import double_layer_T
    from SplashSqueeze.curve import ellipse
    c = ellipse(512, 1.0, 0.6)
    solver = SingleLayerSolver(c)
    T = double_layer_T(c)
    ks = np.arange(4, 65)
    assert growth_exponent(n_res(c, solver, T), c, ks) <= 0.1
    assert abs(growth_exponent(dtn_minus(c, solver, T), c, ks) - 1) <= 0.05


def test_dtn_plus_floor():
    from SplashSqueeze.fieldop import dtn_plus
    from SplashSqueeze.utils import IllConditionedError
    c = splash_strip(64, 0.05)
    with assert_raises(IllConditionedError):
        dtn_plus(c, delta=1e-4)
    with assert_raises(IllConditionedError):
        dtn_plus(wavy_strip(32), delta=1.0, cap=1.0)


def test_hilbert_flat():
    from SplashSqueeze.fieldop import hilbert_transform
    from SplashSqueeze.curve import flat_line
    from SplashSqueeze.utils import ValidationError
    c = flat_line(64)
    H = hilbert_transform(c)
    for k in range(1, 24):
        np.testing.assert_allclose(H.dot(np.cos(k * c.theta)), np.sin(k * c.theta), atol=1e-8)
        np.testing.assert_allclose(H.dot(np.sin(k * c.theta)), -np.cos(k * c.theta), atol=1e-8)
    np.testing.assert_allclose(H.dot(np.ones(64)), 0, atol=1e-10)
    with assert_raises(ValidationError):
        hilbert_transform(c, route='sqrt')
    with assert_raises(ValidationError):
        hilbert_transform(c, route='unknown')


def test_hilbert_routes_agree():
    from SplashSqueeze.fieldop import hilbert_transform
    c = wavy_strip(128)
    f = random_band_limited(128, kmax=6, seed=3)
    a = hilbert_transform(c).dot(f)
    b = hilbert_transform(c, route='sqrt', z_star=(0.0, 1.0)).dot(f)
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_sqrt_map_at_splash():
    from SplashSqueeze.fieldop import sqrt_map
    c = splash_strip(128, 0.0)
    sm = sqrt_map(c, (0.0, 1.0))
    assert sm.chord_arc_constant > 0
    assert sm.image.is_closed
    assert sm.orientation in [1.0, -1.0]


def test_e_operator():
    from SplashSqueeze.fieldop import build_E, stack, unstack
    from SplashSqueeze.curve import frame
    c = wavy_strip(64)
    E = build_E(c)
    V = np.vstack([random_band_limited(64, seed=1), random_band_limited(64, seed=2)]).T
    np.testing.assert_allclose(unstack(stack(V)), V)
    W = E.apply(V)
    np.testing.assert_allclose(E.inverse(W), V, atol=1e-12)
    np.testing.assert_allclose(W[:, 1], (frame(c).normal * V).sum(axis=1), atol=1e-14)
    np.testing.assert_allclose(np.dot(E.e_inv_matrix.matrix, E.e_matrix.matrix), np.eye(128), atol=1e-10)


def test_harmonic_extension_flat():
    from SplashSqueeze.fieldop import harmonic_extension
    from SplashSqueeze.curve import flat_line
    from SplashSqueeze.utils import ValidationError
    c = flat_line(64)
    f = np.cos(c.theta)
    below = harmonic_extension(c, f, '-')
    above = harmonic_extension(c, f, '+')
    x1 = np.array([0.3, -2.0])
    np.testing.assert_allclose(below(np.vstack([x1, [-0.5, -0.5]]).T), np.cos(x1) * np.exp(-0.5), atol=1e-9)
    np.testing.assert_allclose(above(np.vstack([x1, [0.5, 0.5]]).T), np.cos(x1) * np.exp(-0.5), atol=1e-9)
    g = below.gradient(np.array([[0.3, -0.5]]))
    np.testing.assert_allclose(g[0], [-np.sin(0.3) * np.exp(-0.5), np.cos(0.3) * np.exp(-0.5)], atol=1e-9)
    np.testing.assert_allclose(below.normal_derivative(), f, atol=1e-9)
    with assert_raises(ValidationError):
        above.gradient(np.array([[0.0, 1.0]]))
    with assert_raises(ValidationError):
        harmonic_extension(c, f, 'x')


def test_normal_derivative_matches_dtn():
    from SplashSqueeze.fieldop import harmonic_extension, dtn_minus
    c = wavy_strip(64)
    f = random_band_limited(64, kmax=6, seed=4)
    ext = harmonic_extension(c, f, '-')
    np.testing.assert_allclose(ext.normal_derivative(), dtn_minus(c).dot(f), atol=1e-7)


def test_hilbert_squares_to_minus_identity():
    from SplashSqueeze.fieldop import hilbert_transform, arclength_mean_projector
    c = wavy_strip(128)
    f = np.dot(arclength_mean_projector(c), random_band_limited(128, kmax=6, seed=5))
    H = hilbert_transform(c)
    np.testing.assert_allclose(H.dot(H.dot(f)), -f, atol=1e-6)
    w = c.speed() * c.h
    assert abs(np.dot(w, H.dot(f))) < 1e-10


def test_e_operator_harmonic_trace():
    from SplashSqueeze.fieldop import build_E
    from SplashSqueeze.curve import flat_line
    c = flat_line(64)
    E = build_E(c)
    for k in range(1, 17):
        V = np.vstack([np.cos(k * c.theta), np.sin(k * c.theta)]).T
        W = E.apply(V)
        np.testing.assert_allclose(W[:, 0], 0, atol=1e-8)
        np.testing.assert_allclose(W[:, 1], np.sin(k * c.theta), atol=1e-12)


def test_hilbert_routes_near_splash():
    from SplashSqueeze.fieldop import hilbert_transform
    from SplashSqueeze.curve import theta_grid
    c = splash_strip(512, 0.05)
    theta = theta_grid(512)
    f = np.cos(theta) + 0.5 * np.sin(3 * theta)
    a = hilbert_transform(c).dot(f)
    b = hilbert_transform(c, route='sqrt', z_star=(0.0, 1.0)).dot(f)
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_sqrt_route_resolved_at_small_pinch():
    from SplashSqueeze.fieldop import hilbert_transform
    from SplashSqueeze.curve import theta_grid
    res = []
    for n in [256, 512]:
        theta = theta_grid(n)
        f = np.cos(theta) + 0.5 * np.sin(3 * theta)
        res.append(hilbert_transform(splash_strip(n, 1e-3), route='sqrt', z_star=(0.0, 1.0)).dot(f))
    np.testing.assert_allclose(res[0], res[1][::2], atol=1e-5)


def test_sqrt_map_chord_arc_floor():
    from SplashSqueeze.fieldop import sqrt_map
    family = [sqrt_map(splash_strip(128, d), (0.0, 1.0)).chord_arc_constant for d in [0.1, 0.05, 0.025, 0.0125]]
    splash = sqrt_map(splash_strip(128, 0.0), (0.0, 1.0)).chord_arc_constant
    assert min(family) >= 0.5 * max(family)
    assert splash >= 0.5 * min(family)


def test_sqrt_map_splash_labels():
    from SplashSqueeze.fieldop import sqrt_map
    c = splash_strip(128, 0.0)
    # labels -pi/2 and pi/2 meet at the splash point
    i, j = 32, 96
    assert np.abs(c.points[i] - c.points[j]).max() < 1e-10
    sm = sqrt_map(c, (0.0, 1.0))
    assert abs(sm.zeta[i] - sm.zeta[j]) > 0.1


def test_sqrt_map_cut():
    from SplashSqueeze.fieldop import sqrt_map
    z_star = np.array([0.0, 1.0])
    sm = sqrt_map(splash_strip(128, 1e-3), z_star)
    assert abs(sm.cut_angle - 0.5 * np.pi) < 1e-2
    c = wavy_strip(128)
    sm = sqrt_map(c, z_star)
    assert sm.cut_angle == 0.5 * np.pi
    flat = sqrt_map(c, z_star, cut=0.0)
    assert flat.cut_angle == 0.0
    z = c.points[:, 0] + 1j * c.points[:, 1] - (z_star[0] + 1j * z_star[1])
    rho = flat.zeta * np.exp(0.25j * np.pi)
    np.testing.assert_allclose(rho ** 2, 1j * np.tan(z / 2), atol=1e-12)
    same = np.abs(flat.zeta - sm.zeta).max()
    opposite = np.abs(flat.zeta + sm.zeta).max()
    assert min(same, opposite) < 1e-12
    np.testing.assert_allclose(flat.chord_arc_constant, sm.chord_arc_constant, rtol=1e-12)
