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


import os
import tempfile
import numpy as np
from numpy.testing import assert_allclose
from nose.tools import assert_raises
from SplashSqueeze.curve import flat_line, from_function, pinch, circle, resample
from SplashSqueeze.utils import ValidationError, DegenerateCurveError
from SplashSqueeze.vacuum import WallSet, solve_vacuum


def slab(n_theta=16, n_psi=16, height=1.0):
    from SplashSqueeze.plasma import SigmaGrid
    grid = SigmaGrid(n_theta, n_psi)
    T, P = grid.mesh()
    return grid, np.stack([T, height * (1 + P)], axis=-1)


def test_sigma_grid():
    from SplashSqueeze.plasma import SigmaGrid
    grid = SigmaGrid(16, 16)
    assert grid.shape == (16, 16)
    assert grid.size == 256
    assert_allclose(grid.psi[0], 0, atol=1e-14)
    assert_allclose(grid.psi[-1], -1, atol=1e-14)
    T, P = grid.mesh()
    assert_allclose(grid.d_psi(P ** 2), 2 * P, atol=1e-10)
    assert_allclose(grid.d_theta(np.cos(T)), -np.sin(T), atol=1e-12)
    assert_allclose(grid.integrate(np.ones(grid.shape)), 2 * np.pi, atol=1e-12)
    assert_allclose(grid.integrate(P), -np.pi, atol=1e-12)
    assert_raises(ValidationError, SigmaGrid, 15, 16)
    assert_raises(ValidationError, SigmaGrid, 16, 8)


def test_d_theta_map():
    grid, X = slab()
    T, P = grid.mesh()
    X[..., 0] += 0.1 * np.sin(T)
    Xt = grid.d_theta_map(X)
    assert_allclose(Xt[..., 0], 1 + 0.1 * np.cos(T), atol=1e-12)
    assert_allclose(Xt[..., 1], 0, atol=1e-12)


def test_sigma_operator_flat():
    from SplashSqueeze.plasma import SigmaOperator
    for h in [1.0, 2.0]:
        grid, X = slab(height=h)
        op = SigmaOperator(grid, X)
        assert_allclose(op.jacobian, h, atol=1e-10)
        _, P = grid.mesh()
        assert_allclose(op.apply(P ** 2), 2 / h, atol=1e-8)
        g = op.gradient(h * (1 + P))
        assert_allclose(g[..., 0], 0, atol=1e-10)
        assert_allclose(g[..., 1], 1, atol=1e-10)


def test_sigma_operator_solve():
    from SplashSqueeze.plasma import SigmaOperator
    grid, X = slab()
    op = SigmaOperator(grid, X)
    _, P = grid.mesh()
    zeros = np.zeros(grid.n_theta)
    rhs = 2 * np.ones(grid.shape)
    q = op.solve(rhs, ('dirichlet', zeros), ('dirichlet', zeros))
    assert_allclose(q, P ** 2 + P, atol=1e-9)
    assert op.residual < 1e-10
    q = op.solve(rhs, ('dirichlet', zeros), ('neumann', zeros))
    assert_allclose(q, P ** 2 + 2 * P, atol=1e-9)
    assert_raises(ValidationError, op.solve, rhs, ('neumann', zeros), ('neumann', zeros))
    assert_raises(ValidationError, op.solve, rhs, ('robin', zeros), ('dirichlet', zeros))


def test_circulation():
    from SplashSqueeze.plasma import SigmaOperator
    grid, X = slab()
    op = SigmaOperator(grid, X)
    _, P = grid.mesh()
    assert_allclose(op.circulation(P), -2 * np.pi, atol=1e-10)


def test_folded_map():
    from SplashSqueeze.plasma import SigmaOperator
    grid, X = slab()
    X[..., 1] *= -1
    assert_raises(DegenerateCurveError, SigmaOperator, grid, X)
    assert_raises(ValidationError, SigmaOperator, grid, X[..., 0])


def test_label_determinant():
    from SplashSqueeze.plasma import label_determinant
    grid, X = slab(height=2.0)
    assert_allclose(label_determinant(grid, X, is_map=True), 2, atol=1e-10)
    T, P = grid.mesh()
    U = np.stack([np.cos(T), P], axis=-1)
    assert_allclose(label_determinant(grid, U), -np.sin(T), atol=1e-10)


def test_pressure_source():
    from SplashSqueeze.plasma import pressure_source
    grid, X = slab()
    T, P = grid.mesh()
    U = np.stack([np.cos(T), P], axis=-1)
    B = np.stack([np.ones(grid.shape), np.zeros(grid.shape)], axis=-1)
    assert_allclose(pressure_source(grid, U, B), -2 * np.sin(T), atol=1e-10)


def test_field_line_stream():
    from SplashSqueeze.plasma import field_line_stream
    grid, _ = slab()
    chi = field_line_stream(grid, np.ones(grid.n_psi))
    assert chi.shape == grid.shape
    assert_allclose(chi[0], -(1 + grid.psi), atol=1e-10)


def test_flux_correction():
    from SplashSqueeze.plasma import FluxCorrection, flux_and_correction
    curve = flat_line(64, 1.0)
    c = 0.3
    U = np.tile([0.0, c], (64, 1))
    corr = flux_and_correction(curve, U)
    assert isinstance(corr, FluxCorrection)
    assert_allclose(corr.flux, 2 * np.pi * c, rtol=1e-12)
    assert_allclose(corr.area, 2 * np.pi, rtol=1e-12)
    assert_allclose(corr.top(), U, atol=1e-8)
    w = corr(np.array([[0.3, 0.5], [-1.0, 0.25]]))
    assert_allclose(w[:, 0], 0, atol=1e-5)
    assert_allclose(w[:, 1], [0.5 * c, 0.25 * c], atol=1e-5)
    zero = FluxCorrection(curve, np.zeros((64, 2)))
    assert zero.coef == 0
    assert_allclose(zero(np.array([[0.0, 0.5]])), 0)


def test_divcurl_static():
    from SplashSqueeze.plasma import SigmaOperator, divcurl_solve, field_line_stream
    grid, X = slab()
    sigma = np.ones(grid.n_psi)
    op = SigmaOperator(grid, X)
    J = op.apply(field_line_stream(grid, sigma))
    bulk = divcurl_solve(grid, X, np.zeros(grid.shape), J, flat_line(32, 1.0), np.zeros((32, 2)), sigma,
                         0.0, 2 * np.pi, op=op)
    assert_allclose(bulk.U, 0, atol=1e-9)
    assert_allclose(bulk.B[..., 0], 1, atol=1e-9)
    assert_allclose(bulk.B[..., 1], 0, atol=1e-9)
    assert bulk.flux == 0
    assert bulk.jacobian_defect() < 1e-10
    assert bulk.tangency() < 1e-10


def test_divcurl_circulation():
    from SplashSqueeze.plasma import SigmaOperator, divcurl_solve
    grid, X = slab()
    sigma = np.ones(grid.n_psi)
    op = SigmaOperator(grid, X)
    zeros = np.zeros(grid.shape)
    bulk = divcurl_solve(grid, X, zeros, zeros, flat_line(32, 1.0), np.zeros((32, 2)), sigma,
                         2 * np.pi * 0.5, 0.0, op=op)
    # uniform flow U = (1/2, 0) carries the floor circulation
    assert_allclose(bulk.U[..., 1], 0, atol=1e-9)
    assert_allclose(bulk.U[:, -1, 0], 0.5, atol=1e-9)
    assert_allclose(bulk.U[:, 0, 0], 0.5, atol=1e-9)
    assert_allclose(bulk.B, 0, atol=1e-9)


def test_pressure_static():
    from SplashSqueeze.plasma import SigmaOperator, interior_pressure_gradient, full_pressure_gradient
    grid, X = slab()
    op = SigmaOperator(grid, X)
    U = np.zeros(grid.shape + (2, ))
    B = np.stack([np.ones(grid.shape), np.zeros(grid.shape)], axis=-1)
    p = interior_pressure_gradient(op, U, B)
    assert_allclose(p.q, 0, atol=1e-12)
    assert p.trace.shape == (grid.n_theta, 2)
    curve = flat_line(32, 1.0)
    H = np.tile([0.2, 0.0], (32, 1))
    full = full_pressure_gradient(op, U, B, curve, H)
    assert_allclose(full.q, 0.02, atol=1e-10)
    assert_allclose(full.gradient, 0, atol=1e-9)


def test_pressure_decomposition_flat():
    from SplashSqueeze.plasma import SigmaOperator, pressure_decomposition_check
    grid, X = slab()
    op = SigmaOperator(grid, X)
    curve = flat_line(64, 1.0)
    sol = solve_vacuum(curve, WallSet(flat_line(64, 3.0), None), delta=1.0)
    U = np.zeros(grid.shape + (2, ))
    B = np.stack([np.ones(grid.shape), np.zeros(grid.shape)], axis=-1)
    assert pressure_decomposition_check(op, U, B, curve, sol, delta=1.0) < 1e-6


def test_bulk_fields_json():
    from SplashSqueeze.plasma import BulkFields
    grid, X = slab()
    T, P = grid.mesh()
    U = np.stack([np.cos(T), P], axis=-1)
    bulk = BulkFields(grid, X, U, U[..., ::-1], T * P, P, np.ones(grid.n_psi), flux=0.5)
    fname = os.path.join(tempfile.mkdtemp(), 'bulk.json')
    bulk.save(fname)
    other = BulkFields.load(fname)
    assert other.grid.shape == grid.shape
    assert_allclose(other.Xmap, X)
    assert_allclose(other.U, U)
    assert_allclose(other.B, U[..., ::-1])
    assert_allclose(other.omega, T * P)
    assert other.flux == 0.5
    data = bulk.to_json()
    del data['J']
    assert_raises(ValidationError, BulkFields.from_json, data)


def test_sine_strip_map():
    from SplashSqueeze.plasma import SineStripMap
    fmap = SineStripMap(1.0, (0.1, ))
    xi = np.linspace(-np.pi, np.pi, 7)
    f, _ = fmap(xi, -1.0)
    assert_allclose(f.imag, 0, atol=1e-14)
    f, fp = fmap(xi, -0.5)
    e = 1e-6
    f2, _ = fmap(xi + e, -0.5)
    assert_allclose((f2 - f) / e, fp, atol=1e-5)


def test_conformal_strip_map_flat():
    from SplashSqueeze.plasma import conformal_strip_map
    fmap, cr = conformal_strip_map(flat_line(64, 1.0))
    assert_allclose(fmap.height, 1.0, rtol=1e-8)
    assert cr < 1e-8
    assert_raises(ValidationError, conformal_strip_map, circle(32, 0.5, center=(0, 1)))


def test_conformal_strip_map_wavy():
    from SplashSqueeze.plasma import conformal_strip_map

    def func(t):
        return t + 0.1 * np.sin(t), 1 + 0.2 * np.cos(t)
    curve = from_function(128, func)
    fmap, cr = conformal_strip_map(curve)
    assert cr < 1e-6
    assert 0.8 < fmap.height < 1.2
    f, _ = fmap(curve.theta, -1.0)
    assert_allclose(f.imag, 0, atol=1e-10)


def test_equal_jacobian_map():
    from SplashSqueeze.plasma import SigmaGrid, SineStripMap, equal_jacobian_map, label_determinant
    grid = SigmaGrid(64, 16)
    X, sigma = equal_jacobian_map(SineStripMap(), 64, grid.psi)
    assert X.shape == (64, 16, 2)
    assert np.all(sigma > 0)
    jac = label_determinant(grid, X, is_map=True)
    assert_allclose(jac, np.tile(sigma, (64, 1)), atol=1e-6)
    assert_allclose(X[:, -1, 1], 0, atol=1e-12)


def test_initial_data_analytic():
    from SplashSqueeze.plasma import build_initial_data
    data = build_initial_data('analytic', n_surface=64, n_theta=32, n_psi=16)
    assert data.kind == 'analytic'
    assert data.nu_bar == 1.0
    assert data.curve.n_nodes == 64
    assert data.U.shape == (64, 2)
    assert data.bulk.jacobian_defect() < 1e-6
    assert data.bulk.tangency() < 1e-10
    assert_allclose(data.bulk.B[:, 0], resample(data.curve.derivative(1), 32), atol=1e-8)
    assert_allclose(data.X0map, data.bulk.Xmap)
    assert data.beta_bar > 0
    assert data.strip_height == 1.0


def test_initial_data_errors():
    from SplashSqueeze.plasma import build_initial_data
    assert_raises(ValidationError, build_initial_data, 'bogus')
    assert_raises(ValidationError, build_initial_data, 'near_splash', delta_init=0.0)
    assert_raises(ValidationError, build_initial_data, 'analytic', direction='sideways')


def test_initial_data_near_splash():
    from SplashSqueeze.plasma import build_initial_data
    data = build_initial_data('near_splash', delta_init=0.1, n_surface=256, n_theta=32, n_psi=16)
    assert data.nu_bar > 0
    assert data.cr_residual < 1e-2
    assert abs(pinch(data.curve).delta - 0.1) < 1e-2
    assert data.bulk.jacobian_defect() < 1e-3
