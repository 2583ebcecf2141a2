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
import logging
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.linalg import lu_factor, lu_solve
from .curve import GridCurve, from_function, frame, pinch, perp, resample, theta_grid
from .potential import single_layer, adjoint_double_layer, cross_single_layer, cross_gradient
from .potential import evaluate_potential
from .fieldop import harmonic_extension, n_res
from .vacuum import trace_H, exterior_pressure_gradient
from .utils import TOLERANCES, cheb, clenshaw_curtis, perispecint, wavenumbers, fourier_diff_matrix
from .utils import ValidationError, SolverError, ConvergenceError, ShapeConstraintError, DegenerateCurveError
from .utils import write_json, read_json, dense_solve


LOGGER = logging.getLogger('SplashSqueeze')


def trough_curve(n, delta):
    """Interface of the splash scenario: a trough with bottom (0, 1/2) and two
    overhanging arcs meeting near (0, 2), their labels pi/2 and -pi/2 `delta`
    apart in x1"""
    def func(t):
        x1 = t + (0.5 * delta - 0.5 * np.pi) * np.sin(t) + 0.7 * np.sin(2 * t) + 0.1 * np.sin(4 * t)
        x2 = 1.25 - 0.25 * np.cos(t) - 0.75 * np.cos(2 * t) + 0.25 * np.cos(3 * t)
        return x1, x2
    return from_function(n, func)


def reflect(curve):
    """Mirror image across the floor x2 = 0"""
    return GridCurve(curve.points * np.array([1.0, -1.0]), shift=curve.shift, time=curve.time)


def _trig_eval(samples, x):
    """Trigonometric interpolant of samples on theta_grid at the points x"""
    n = samples.shape[0]
    coef = np.fft.fft(samples, axis=0) / n
    k = wavenumbers(n)
    k[n // 2] = n // 2
    E = np.exp(1j * np.outer(np.ravel(x) + np.pi, k))
    return np.real(np.dot(E, coef)).reshape(np.shape(x) + samples.shape[1:])


class SigmaGrid(object):
    """Tensor grid on S^1 x [-1, 0]: uniform theta by Chebyshev-Lobatto psi.
    Column 0 is the interface psi = 0, the last column the floor psi = -1"""

    def __init__(self, n_theta, n_psi):
        if n_theta < 8 or n_theta % 2:
            raise ValidationError('n_sigma_theta: must be an even integer >= 8 (got %s)' % n_theta)
        if n_psi < 16:
            raise ValidationError('n_sigma_psi: must be >= 16 (got %s)' % n_psi)
        x, D = cheb(n_psi - 1)
        self._n_theta = n_theta
        self._n_psi = n_psi
        self._theta = theta_grid(n_theta)
        self._psi = 0.5 * (x - 1)
        self._Dpsi = 2 * D
        self._wpsi = 0.5 * clenshaw_curtis(n_psi - 1)
        self._Dtheta = None

    @property
    def n_theta(self):
        return self._n_theta

    @property
    def n_psi(self):
        return self._n_psi

    @property
    def shape(self):
        return (self._n_theta, self._n_psi)

    @property
    def size(self):
        return self._n_theta * self._n_psi

    @property
    def theta(self):
        return self._theta

    @property
    def psi(self):
        return self._psi

    @property
    def h(self):
        return 2 * np.pi / self._n_theta

    @property
    def Dpsi(self):
        return self._Dpsi

    @property
    def Dtheta(self):
        if self._Dtheta is None:
            self._Dtheta = fourier_diff_matrix(self._n_theta)
        return self._Dtheta

    def mesh(self):
        return np.meshgrid(self._theta, self._psi, indexing='ij')

    def d_theta(self, F):
        F = np.asarray(F, dtype=float)
        n = F.shape[0]
        k = 1j * wavenumbers(n)
        k[n // 2] = 0
        k = k.reshape((n, ) + (1, ) * (F.ndim - 1))
        return np.real(np.fft.ifft(np.fft.fft(F, axis=0) * k, axis=0))

    def d_theta_map(self, X):
        """d_theta of a map with X(theta + 2 pi) = X(theta) + (2 pi, 0)"""
        P = np.array(X, dtype=float)
        P[..., 0] -= self._theta.reshape((-1, ) + (1, ) * (P.ndim - 2))
        res = self.d_theta(P)
        res[..., 0] += 1
        return res

    def d_psi(self, F):
        return np.einsum('jk,ik...->ij...', self._Dpsi, np.asarray(F, dtype=float))

    def integrate(self, F):
        return self.h * np.einsum('ij...,j->...', np.asarray(F, dtype=float), self._wpsi)

    def line_integral(self, f):
        """Trapezoid integral in theta of a row of samples"""
        return self.h * np.sum(f, axis=0)


def _as_points(Xmap):
    X = np.asarray(Xmap, dtype=float)
    if X.ndim != 3 or X.shape[2] != 2:
        raise ValidationError('Xmap: expected an (n_theta, n_psi, 2) array (got shape %s)' % (X.shape, ))
    return X


class SigmaOperator(object):
    """Collocation matrix of the label-space Laplacian div_a(A grad_a),
    A = cof(M) M^-1, M = grad_a X; J times the Eulerian Laplacian.

    Boundary rows are replaced by Dirichlet or conormal rows; factorizations
    are cached per boundary-condition pair."""

    def __init__(self, grid, Xmap):
        X = _as_points(Xmap)
        self._grid = grid
        self._X = X
        Xt = grid.d_theta_map(X)
        Xp = grid.d_psi(X)
        jac = Xt[..., 0] * Xp[..., 1] - Xp[..., 0] * Xt[..., 1]
        if jac.min() <= 0:
            raise DegenerateCurveError('det grad X = %0.3e: the Lagrangian map folds' % jac.min())
        self._Xt = Xt
        self._Xp = Xp
        self._jac = jac
        A11 = (Xp ** 2).sum(axis=-1) / jac
        A12 = -(Xt * Xp).sum(axis=-1) / jac
        A22 = (Xt ** 2).sum(axis=-1) / jac
        self._A12, self._A22 = A12, A22
        nt, npsi = grid.shape
        Dt = sparse.kron(sparse.csr_matrix(grid.Dtheta), sparse.identity(npsi), format='csr')
        Dp = sparse.kron(sparse.identity(nt), sparse.csr_matrix(grid.Dpsi), format='csr')

        def d(a):
            return sparse.diags(a.ravel())
        self._L = (Dt * d(A11) * Dt + Dt * d(A12) * Dp + Dp * d(A12) * Dt + Dp * d(A22) * Dp).tocsr()
        self._conormal = (d(A12) * Dt + d(A22) * Dp).tocsr()
        index = np.arange(grid.size).reshape(grid.shape)
        self._top = index[:, 0]
        self._bottom = index[:, -1]
        self._factors = dict()
        self._residual = 0.0
        self._logger = logging.getLogger('SplashSqueeze')

    @property
    def grid(self):
        return self._grid

    @property
    def Xmap(self):
        return self._X

    @property
    def jacobian(self):
        return self._jac

    @property
    def X_theta(self):
        return self._Xt

    @property
    def X_psi(self):
        return self._Xp

    @property
    def residual(self):
        "Relative residual of the last solve"
        return self._residual

    def apply(self, F):
        return (self._L * np.asarray(F, dtype=float).ravel()).reshape(self._grid.shape)

    def conormal(self, F):
        """(A grad_a F)_psi = X_theta^perp . grad F"""
        return (self._conormal * np.asarray(F, dtype=float).ravel()).reshape(self._grid.shape)

    def _system(self, bc):
        n = self._grid.size
        mask = np.zeros(n)
        mask[self._top] = 1
        mask[self._bottom] = 1
        top_d = np.zeros(n)
        top_n = np.zeros(n)
        bot_d = np.zeros(n)
        bot_n = np.zeros(n)
        (top_d if bc[0] == 'dirichlet' else top_n)[self._top] = 1
        (bot_d if bc[1] == 'dirichlet' else bot_n)[self._bottom] = 1
        I = sparse.identity(n, format='csr')
        M = (sparse.diags(1 - mask) * self._L + sparse.diags(top_d + bot_d) * I +
             sparse.diags(top_n + bot_n) * self._conormal)
        return M.tocsr()

    def _factor(self, bc):
        if bc not in self._factors:
            for kind in bc:
                if kind not in ['dirichlet', 'neumann']:
                    raise ValidationError('boundary condition: must be dirichlet or neumann (got %r)' % kind)
            if bc == ('neumann', 'neumann'):
                raise ValidationError('boundary condition: a Dirichlet face is required')
            M = self._system(bc)
            n = M.shape[0]
            if M.nnz > 0.25 * n * n:
                lu = lu_factor(M.toarray())
                solver = lambda b: lu_solve(lu, b)
            else:
                try:
                    solver = splu(M.tocsc()).solve
                except RuntimeError as e:
                    raise SolverError('Sigma collocation system: %s' % e)
            self._factors[bc] = (M, solver)
        return self._factors[bc]

    def solve(self, rhs, top, bottom):
        """Solves the collocation system; top and bottom are
        (kind, values) pairs, kind dirichlet or neumann (conormal datum)"""
        bc = (top[0], bottom[0])
        M, solver = self._factor(bc)
        b = np.array(rhs, dtype=float).reshape(self._grid.shape)
        b[:, 0] = top[1]
        b[:, -1] = bottom[1]
        b = b.ravel()
        x = solver(b)
        if not np.all(np.isfinite(x)):
            raise SolverError('Sigma solve produced non-finite values')
        r = M * x - b
        self._residual = float(np.abs(r).max() / max(1.0, np.abs(b).max()))
        if self._residual > TOLERANCES['residual']:
            self._logger.warning('Sigma solve residual %0.3e' % self._residual)
        return x.reshape(self._grid.shape)

    def gradient(self, q):
        """Eulerian gradient (C / J) grad_a q, shape (n_theta, n_psi, 2)"""
        qt = self._grid.d_theta(q)
        qp = self._grid.d_psi(q)
        Xt, Xp, jac = self._Xt, self._Xp, self._jac
        g1 = (Xp[..., 1] * qt - Xt[..., 1] * qp) / jac
        g2 = (-Xp[..., 0] * qt + Xt[..., 0] * qp) / jac
        return np.stack([g1, g2], axis=-1)

    def circulation(self, phi):
        """int U . X_theta dtheta on the floor for U = perp(grad phi)"""
        return -self._grid.line_integral(self.conormal(phi)[:, -1])


def label_determinant(grid, F, is_map=False):
    """det grad_a F of a 2-vector field on the grid; is_map for a Lagrangian
    map, whose x1 grows by 2 pi over a period"""
    Ft = grid.d_theta_map(F) if is_map else grid.d_theta(F)
    Fp = grid.d_psi(F)
    return Ft[..., 0] * Fp[..., 1] - Fp[..., 0] * Ft[..., 1]


class BulkFields(object):
    """Fields on Sigma: trajectory map, velocity, magnetic field, vorticity,
    current and the field-line profile sigma"""

    def __init__(self, grid, Xmap, U, B, omega, J, sigma, flux=0.0):
        self._grid = grid
        self._Xmap = _as_points(Xmap)
        self._U = np.asarray(U, dtype=float)
        self._B = np.asarray(B, dtype=float)
        self._omega = np.asarray(omega, dtype=float)
        self._J = np.asarray(J, dtype=float)
        self._sigma = np.asarray(sigma, dtype=float)
        self._flux = flux

    @property
    def grid(self):
        return self._grid

    @property
    def Xmap(self):
        return self._Xmap

    @property
    def U(self):
        return self._U

    @property
    def B(self):
        return self._B

    @property
    def omega(self):
        return self._omega

    @property
    def J(self):
        return self._J

    @property
    def sigma(self):
        return self._sigma

    @property
    def flux(self):
        return self._flux

    def jacobian(self):
        return label_determinant(self._grid, self._Xmap, is_map=True)

    def jacobian_defect(self):
        return float(np.abs(self.jacobian() - self._sigma[np.newaxis, :]).max())

    def tangency(self):
        """max |N . B| on the interface and the floor"""
        Xt = self._grid.d_theta_map(self._Xmap)
        N = perp(Xt)
        nb = (N * self._B).sum(axis=-1) / np.sqrt((Xt ** 2).sum(axis=-1))
        return float(max(np.abs(nb[:, 0]).max(), np.abs(nb[:, -1]).max()))

    def to_json(self):
        g = self._grid
        res = dict(n_theta=g.n_theta, n_psi=g.n_psi, psi=g.psi.tolist(), sigma=self._sigma.tolist(),
                   flux=self._flux)
        for name, F in [('Xmap', self._Xmap), ('U', self._U), ('B', self._B)]:
            res[name + '1'] = F[..., 0].ravel().tolist()
            res[name + '2'] = F[..., 1].ravel().tolist()
        res['omega'] = self._omega.ravel().tolist()
        res['J'] = self._J.ravel().tolist()
        return res

    @classmethod
    def from_json(cls, data):
        try:
            grid = SigmaGrid(data['n_theta'], data['n_psi'])
            shape = grid.shape

            def vec(name):
                return np.stack([np.reshape(data[name + '1'], shape), np.reshape(data[name + '2'], shape)],
                                axis=-1)
            return cls(grid, vec('Xmap'), vec('U'), vec('B'), np.reshape(data['omega'], shape),
                       np.reshape(data['J'], shape), data['sigma'], flux=data.get('flux', 0.0))
        except KeyError as e:
            raise ValidationError('%s: missing field' % e.args[0])

    def save(self, fname):
        write_json(fname, self.to_json())

    @classmethod
    def load(cls, fname):
        return cls.from_json(read_json(fname))


class FluxCorrection(object):
    """Flux Phi = int X_theta^perp . U dtheta of the surface velocity and the
    field w = Phi / (2 |Omega|) V, div V = 2 in Omega, n . V = 0 on x2 = 0.

    V = grad int_Omega [G(x - y) + G(x - y_bar)] dy, reduced to single layers
    of the normal components over Gamma and its mirror image"""

    def __init__(self, curve, U):
        U = np.asarray(U, dtype=float)
        xp = curve.derivative(1)
        self._curve = curve
        self._flux = float(curve.h * (perp(xp) * U).sum())
        self._area = float(curve.h * (curve.points[:, 1] * xp[:, 0]).sum())
        if self._area <= 0:
            raise DegenerateCurveError('Plasma region has area %0.3e' % self._area)
        self._coef = self._flux / (2 * self._area)
        self._mirror = reflect(curve)
        self._normal = frame(curve).normal

    @property
    def flux(self):
        return self._flux

    @property
    def area(self):
        return self._area

    @property
    def coef(self):
        return self._coef

    def top(self):
        """w on Gamma"""
        curve = self._curve
        S = single_layer(curve).matrix
        Simg = cross_single_layer(self._mirror, curve.points)
        N = self._normal
        V1 = -(np.dot(S, N[:, 0]) + np.dot(Simg, N[:, 0]))
        V2 = -(np.dot(S, N[:, 1]) - np.dot(Simg, N[:, 1]))
        return self._coef * np.vstack([V1, V2]).T

    def __call__(self, points):
        """w at points off Gamma"""
        points = np.atleast_2d(points)
        N = self._normal
        res = np.zeros(points.shape)
        if self._coef == 0:
            return res
        for i, sgn in enumerate([1.0, -1.0]):
            direct = evaluate_potential(self._curve, N[:, i], points)
            image = evaluate_potential(self._mirror, N[:, i], points)
            res[:, i] = -(direct + sgn * image)
        return self._coef * res


def flux_and_correction(curve, U):
    return FluxCorrection(curve, U)


def correction_on_grid(grid, Xmap, correction):
    """w on Sigma: off-curve evaluation below the interface, the boundary
    formula on the top row"""
    X = _as_points(Xmap)
    res = np.zeros(X.shape)
    if correction.coef == 0:
        return res
    pts = X[:, 1:, :].reshape(-1, 2)
    res[:, 1:, :] = correction(pts).reshape(X.shape[0], X.shape[1] - 1, 2)
    res[:, 0, :] = resample(correction.top(), grid.n_theta)
    return res


def divcurl_solve(grid, Xmap, omega, J, curve, U_surface, sigma, alpha_bar, beta_bar, op=None):
    """Bulk velocity and magnetic field from (omega, J), the surface velocity
    and the floor circulations.

    U = perp(grad phi) + w with sigma omega = L phi, phi = 0 on the floor and
    d_theta phi = X_theta^perp . (U - w) on the interface; the constant on the
    interface is set by int U . X_theta = alpha_bar on the floor. B =
    perp(grad chi) with sigma J = L chi, chi = 0 on the floor, constant on the
    interface, int B . X_theta = beta_bar on the floor."""
    op = SigmaOperator(grid, Xmap) if op is None else op
    sigma = np.asarray(sigma, dtype=float)
    corr = flux_and_correction(curve, U_surface)
    w = correction_on_grid(grid, op.Xmap, corr)
    xp = curve.derivative(1)
    g = (perp(xp) * (np.asarray(U_surface) - corr.top())).sum(axis=1)
    top = perispecint(resample(g, grid.n_theta))
    zeros = np.zeros(grid.n_theta)
    ones = np.ones(grid.n_theta)
    homog = op.solve(np.zeros(grid.shape), ('dirichlet', ones), ('dirichlet', zeros))
    circ_h = op.circulation(homog)
    if abs(circ_h) < 1e-14:
        raise SolverError('Homogeneous circulation vanishes')
    phi = op.solve(sigma[np.newaxis, :] * omega, ('dirichlet', top), ('dirichlet', zeros))
    Xt = op.X_theta
    w_circ = grid.line_integral((w[:, -1] * Xt[:, -1]).sum(axis=-1))
    phi = phi + (alpha_bar - w_circ - op.circulation(phi)) / circ_h * homog
    chi = op.solve(sigma[np.newaxis, :] * J, ('dirichlet', zeros), ('dirichlet', zeros))
    chi = chi + (beta_bar - op.circulation(chi)) / circ_h * homog
    U = perp(op.gradient(phi)) + w
    B = perp(op.gradient(chi))
    return BulkFields(grid, op.Xmap, U, B, omega, J, sigma, flux=corr.flux)


class PressureField(object):
    def __init__(self, q, gradient, residual):
        self._q = q
        self._gradient = gradient
        self._residual = residual

    @property
    def q(self):
        return self._q

    @property
    def gradient(self):
        return self._gradient

    @property
    def trace(self):
        "Gradient on the interface row"
        return self._gradient[:, 0, :]

    @property
    def residual(self):
        return self._residual


def pressure_source(grid, U, B):
    """J Delta p = 2 det grad_a U - 2 det grad_a B"""
    return 2 * label_determinant(grid, U) - 2 * label_determinant(grid, B)


def _squared_trace(curve, H):
    if H is None:
        return np.zeros(curve.n_nodes)
    return (np.asarray(H) ** 2).sum(axis=1)


def interior_pressure_gradient(op, U, B, curve=None, H=None):
    """P_-: source from the bulk fields, zero on the interface and conormal
    datum -1/2 x1_theta d_2 (h_- |H|^2) on the floor, h_- the bounded
    harmonic extension below Gamma"""
    grid = op.grid
    rhs = pressure_source(grid, U, B)
    bottom = np.zeros(grid.n_theta)
    if curve is not None:
        g = _squared_trace(curve, H)
        if np.any(g):
            ext = harmonic_extension(curve, g, '-')
            floor = op.Xmap[:, -1, :]
            d2 = ext.gradient(floor)[:, 1]
            bottom = op.X_theta[:, -1, 0] * (-0.5 * d2)
    q = op.solve(rhs, ('dirichlet', np.zeros(grid.n_theta)), ('neumann', bottom))
    return PressureField(q, op.gradient(q), op.residual)


def full_pressure_gradient(op, U, B, curve=None, H=None):
    """Pressure with p = |H|^2 / 2 on the interface and d_2 p = 0 on the floor"""
    grid = op.grid
    rhs = pressure_source(grid, U, B)
    top = np.zeros(grid.n_theta)
    if curve is not None:
        top = resample(0.5 * _squared_trace(curve, H), grid.n_theta)
    q = op.solve(rhs, ('dirichlet', top), ('neumann', np.zeros(grid.n_theta)))
    return PressureField(q, op.gradient(q), op.residual)


def pressure_decomposition_check(op, U, B, curve, solution, delta=None, H=None):
    """max |N.P + (|H|^2/|B|^2) N.B_theta - N.P_- - N.P_+ - n_res|H|^2 / 2|
    on the interface nodes; P and P_- from independent Sigma solves"""
    if H is None and not solution.is_zero:
        H = trace_H(solution)
    n = curve.n_nodes
    full = full_pressure_gradient(op, U, B, curve, H)
    minus = interior_pressure_gradient(op, U, B, curve, H)
    P = resample(full.trace, n)
    Pm = resample(minus.trace, n)
    F = frame(curve)
    N = F.normal
    res = (N * P).sum(axis=1) - (N * Pm).sum(axis=1)
    if H is not None:
        g = _squared_trace(curve, H)
        Bt = curve.derivative(2)
        res += g / F.speed ** 2 * (N * Bt).sum(axis=1)
        res -= (N * exterior_pressure_gradient(curve, solution, delta=delta, H=H)).sum(axis=1)
        res -= 0.5 * n_res(curve).dot(g)
    return float(np.abs(res).max())


class StripMap(object):
    """Conformal map f of the strip -H < Im zeta < 0 onto the plasma region,
    Im f = 0 on the bottom edge. zeta = xi + i H psi"""

    def __init__(self, height):
        self._height = float(height)

    @property
    def height(self):
        return self._height

    def __call__(self, xi, psi):
        """Returns (f, f') at zeta = xi + i H psi"""
        raise NotImplementedError()


class SeriesStripMap(StripMap):
    """f = zeta + iH + a_0 + sum_k c_k(psi) exp(ik(xi + pi)) matching the
    interface height x2 - H = sum eta_k exp(ik(xi + pi)) on top"""

    def __init__(self, height, eta_hat, a0):
        super(SeriesStripMap, self).__init__(height)
        n = eta_hat.shape[0]
        k = wavenumbers(n)
        keep = (k != 0) & (np.abs(k) < n // 2)
        self._k = k[keep]
        self._eta = eta_hat[keep]
        self._a0 = float(a0)

    def coefficients(self, psi):
        H = self._height
        k = self._k
        res = np.zeros(k.shape[0], dtype=complex)
        pos = k > 0
        res[pos] = 2j * self._eta[pos] * np.exp(-k[pos] * H * (psi + 2)) / (np.exp(-2 * k[pos] * H) - 1)
        neg = ~pos
        res[neg] = 2j * self._eta[neg] * np.exp(-k[neg] * H * psi) / (1 - np.exp(2 * k[neg] * H))
        return res

    def __call__(self, xi, psi):
        xi = np.asarray(xi, dtype=float)
        c = self.coefficients(psi)
        E = np.exp(1j * np.outer(xi.ravel() + np.pi, self._k))
        zeta = xi.ravel() + 1j * self._height * psi
        f = zeta + 1j * self._height + self._a0 + np.dot(E, c)
        fp = 1 + np.dot(E, 1j * self._k * c)
        return f.reshape(xi.shape), fp.reshape(xi.shape)


class SineStripMap(StripMap):
    """f = zeta + iH + sum_k a_k sin(k (zeta + iH)); real on the bottom edge"""

    def __init__(self, height=1.0, amplitudes=(0.1, )):
        super(SineStripMap, self).__init__(height)
        self._a = np.asarray(amplitudes, dtype=float)

    def __call__(self, xi, psi):
        xi = np.asarray(xi, dtype=float)
        w = xi + 1j * self._height * (psi + 1)
        f = w + 0.0j
        fp = np.ones(xi.shape, dtype=complex)
        for k, a in enumerate(self._a, start=1):
            f = f + a * np.sin(k * w)
            fp = fp + a * k * np.cos(k * w)
        return f, fp


def _floor_image_solve(curve):
    """u harmonic in Omega, u = 1 on Gamma, u = 0 on x2 = 0, as a single
    layer minus its mirror image; returns the flux density d_N u |X_theta|"""
    mirror = reflect(curve)
    A = single_layer(curve).matrix - cross_single_layer(mirror, curve.points)
    sigma = dense_solve(A, np.ones(curve.n_nodes), name='Harmonic coordinate system')
    F = frame(curve)
    dn = -sigma + np.dot(adjoint_double_layer(curve).matrix, sigma)
    g = np.einsum('ijk,j->ik', cross_gradient(mirror, curve.points), sigma)
    dn -= (g * F.normal).sum(axis=1)
    return dn * F.speed


def _invert_monotone(func, dfunc, target, max_iter):
    x = target.copy()
    for _ in range(max_iter):
        r = func(x) - target
        x = x - r / dfunc(x)
        if np.abs(r).max() < 1e-13:
            return x
    raise ConvergenceError('Label inversion did not converge (|r| = %0.3e)' % np.abs(r).max())


def conformal_strip_map(curve, max_iter=None):
    """Strip map of the region between the floor and the x1-periodic curve.

    Returns (map, cr_residual): the flux of the harmonic coordinate gives the
    strip height H = 2 pi / Q and the boundary correspondence; the interface
    height fixes the map and the mismatch of its real part with x1 is the
    Cauchy-Riemann residual"""
    max_iter = TOLERANCES['conformal_max_iter'] if max_iter is None else max_iter
    if curve.is_closed:
        raise ValidationError('curve: the strip map needs an x1-periodic curve')
    n = curve.n_nodes
    q = _floor_image_solve(curve)
    if q.min() <= 0:
        raise ConvergenceError('Harmonic coordinate flux changes sign (min %0.3e)' % q.min())
    Q = curve.h * q.sum()
    H = 2 * np.pi / Q
    P = perispecint(q)
    P0 = _trig_eval(P, np.zeros(1))[0]
    target = theta_grid(n)
    t = _invert_monotone(lambda x: x + H * (_trig_eval(P, x) - P0),
                         lambda x: H * _trig_eval(q, x), target, max_iter)
    pts = curve.evaluate(t)
    eta = np.fft.fft(pts[:, 1] - H) / n
    mean_gap = abs(eta[0].real)
    eta[0] = 0
    a0 = np.mean(pts[:, 0] - target)
    fmap = SeriesStripMap(H, eta, a0)
    f, _ = fmap(target, 0.0)
    cr = max(float(np.abs(f.real - pts[:, 0]).max()), mean_gap)
    LOGGER.info('Strip map: height %0.6f, Cauchy-Riemann residual %0.3e' % (H, cr))
    return fmap, cr


def equal_jacobian_map(fmap, n_theta, psi, sigma=None, m=None, max_iter=None):
    """Lagrangian map X(theta, psi) = f(xi(theta, psi) + i H psi) with xi
    chosen on each level so that det grad X = sigma(psi) is constant in theta.

    sigma(psi) is the mean of H |f'|^2 on the level; returns (X, sigma)"""
    max_iter = TOLERANCES['conformal_max_iter'] if max_iter is None else max_iter
    H = fmap.height
    m = max(4 * n_theta, 256) if m is None else m
    fine = theta_grid(m)
    target = theta_grid(n_theta)
    X = np.zeros((n_theta, psi.shape[0], 2))
    sig = np.zeros(psi.shape[0])
    for j, p in enumerate(psi):
        _, fp = fmap(fine, p)
        Jf = H * np.abs(fp) ** 2
        s = Jf.mean() if sigma is None else sigma[j]
        P = perispecint(Jf)

        def jac(x):
            return H * np.abs(fmap(x, p)[1]) ** 2
        xi = _invert_monotone(lambda x: x + (_trig_eval(P, x) - P[0]) / s,
                              lambda x: jac(x) / s, target, max_iter)
        f, _ = fmap(xi, p)
        X[:, j, 0] = f.real
        X[:, j, 1] = f.imag
        sig[j] = s
    return X, sig


class InitialData(object):
    """Initial interface, Lagrangian map and fields of a scenario"""

    def __init__(self, kind, delta_init, nu_bar, curve, U, bulk, alpha_bar, beta_bar, cr_residual,
                 strip_height):
        self._kind = kind
        self._delta_init = delta_init
        self._nu_bar = nu_bar
        self._curve = curve
        self._U = U
        self._bulk = bulk
        self._alpha_bar = alpha_bar
        self._beta_bar = beta_bar
        self._cr_residual = cr_residual
        self._strip_height = strip_height

    @property
    def kind(self):
        return self._kind

    @property
    def delta_init(self):
        return self._delta_init

    @property
    def nu_bar(self):
        return self._nu_bar

    @property
    def curve(self):
        return self._curve

    @property
    def U(self):
        "Surface velocity on the curve nodes"
        return self._U

    @property
    def bulk(self):
        return self._bulk

    @property
    def X0map(self):
        return self._bulk.Xmap

    @property
    def sigma(self):
        return self._bulk.sigma

    @property
    def alpha_bar(self):
        return self._alpha_bar

    @property
    def beta_bar(self):
        return self._beta_bar

    @property
    def cr_residual(self):
        return self._cr_residual

    @property
    def strip_height(self):
        return self._strip_height


INITIAL_KINDS = ['near_splash', 'splash', 'analytic']


def field_line_stream(grid, sigma):
    """chi_B(psi) with chi_B' = -sigma, chi_B(-1) = 0"""
    D = grid.Dpsi.copy()
    rhs = -np.asarray(sigma, dtype=float).copy()
    D[-1] = 0
    D[-1, -1] = 1
    rhs[-1] = 0
    chi = dense_solve(D, rhs, name='field-line stream')
    return np.tile(chi, (grid.n_theta, 1))


def _velocity(grid, X, amplitude):
    """perp(grad phi) for phi = amplitude (1 + psi) sin(2 theta)"""
    T, P = grid.mesh()
    phi = amplitude * (1 + P) * np.sin(2 * T)
    Xt = grid.d_theta_map(X)
    Xp = grid.d_psi(X)
    jac = Xt[..., 0] * Xp[..., 1] - Xp[..., 0] * Xt[..., 1]
    pt = grid.d_theta(phi)
    pp = grid.d_psi(phi)
    g = np.stack([(Xp[..., 1] * pt - Xt[..., 1] * pp) / jac, (-Xp[..., 0] * pt + Xt[..., 0] * pp) / jac], axis=-1)
    return phi, perp(g)


def _check_shape(curve, delta):
    try:
        frame(curve)
    except DegenerateCurveError as e:
        raise ShapeConstraintError(str(e))
    r = pinch(curve)
    mid = 0.5 * (curve.evaluate(r.theta_star) + curve.evaluate(r.vartheta_star) + r.period_shift * curve.shift)
    if np.hypot(mid[0], mid[1] - 2) > 1e-2:
        raise ShapeConstraintError('Splash point at %s, expected (0, 2)' % mid.tolist())
    X = curve.points
    near = np.abs(X[:, 0]) < 0.25
    j = np.where(near)[0][np.argmin(X[near, 1])]
    if np.hypot(X[j, 0], X[j, 1] - 0.5) > 0.1:
        raise ShapeConstraintError('Trough bottom at %s, expected (0, 1/2)' % X[j].tolist())
    return r


def build_initial_data(kind='near_splash', delta_init=0.05, nu_bar=None, n_surface=512, n_theta=64, n_psi=24,
                       direction=None):
    """Initial data of a scenario.

    near_splash: trough interface with pinch delta_init; splash: the same at
    pinch 0; analytic: f(zeta) = zeta + i + 0.1 sin(zeta + i). Velocity stream
    -+nu_bar (1 + psi) sin(2 theta), - closing (default except for splash).
    nu_bar=None calibrates |N.U| = 2 at the pinch labels"""
    if kind not in INITIAL_KINDS:
        raise ValidationError('kind: must be one of %s (got %r)' % (", ".join(INITIAL_KINDS), kind))
    if direction is None:
        direction = 'opening' if kind == 'splash' else 'closing'
    if direction not in ['closing', 'opening']:
        raise ValidationError('direction: must be closing or opening (got %r)' % direction)
    if kind == 'near_splash' and not delta_init > 0:
        raise ValidationError('delta_init: must be positive for near_splash (got %r)' % delta_init)
    if kind == 'splash':
        delta_init = 0.0
    if kind == 'analytic':
        fmap = SineStripMap()
        cr = 0.0
    else:
        fmap, cr = conformal_strip_map(trough_curve(n_surface, delta_init))
    grid = SigmaGrid(n_theta, n_psi)
    fine_grid = SigmaGrid(n_surface, n_psi)
    Xf, sigma = equal_jacobian_map(fmap, n_surface, fine_grid.psi, m=2 * n_surface)
    X, _ = equal_jacobian_map(fmap, n_theta, grid.psi, sigma=sigma, m=2 * n_surface)
    curve = GridCurve(Xf[:, 0, :])
    sign = -1.0 if direction == 'closing' else 1.0
    if kind != 'analytic':
        r = _check_shape(curve, delta_init)
    if nu_bar is None:
        if kind == 'analytic':
            nu_bar = 1.0
        else:
            _, U1 = _velocity(fine_grid, Xf, sign)
            N = frame(curve).normal
            nu = (N * U1[:, 0, :]).sum(axis=1)
            at = np.abs(_trig_eval(nu, np.array([r.theta_star, r.vartheta_star])))
            nu_bar = 2.0 / at.min()
            LOGGER.info('Calibrated nu_bar %0.6f' % nu_bar)
    _, Uf = _velocity(fine_grid, Xf, sign * nu_bar)
    phi, U = _velocity(grid, X, sign * nu_bar)
    op = SigmaOperator(grid, X)
    omega = op.apply(phi) / sigma[np.newaxis, :]
    J = op.apply(field_line_stream(grid, sigma)) / sigma[np.newaxis, :]
    B = grid.d_theta_map(X)
    Xt = op.X_theta
    alpha_bar = grid.line_integral((U[:, -1] * Xt[:, -1]).sum(axis=-1))
    beta_bar = grid.line_integral((B[:, -1] * Xt[:, -1]).sum(axis=-1))
    bulk = BulkFields(grid, X, U, B, omega, J, sigma)
    LOGGER.info('Initial data %s: jacobian defect %0.3e, alpha %0.3e, beta %0.6f' %
                (kind, bulk.jacobian_defect(), alpha_bar, beta_bar))
    return InitialData(kind, delta_init, nu_bar, curve, Uf[:, 0, :], bulk, alpha_bar, beta_bar, cr,
                       fmap.height)
