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
from collections import namedtuple
from scipy.linalg import lu_factor, lu_solve
from .curve import GridCurve, frame, pinch
from .potential import BoundaryOperator, single_layer, double_layer_T, adjoint_double_layer
from .potential import evaluate_potential
from .utils import TOLERANCES, ValidationError, IllConditionedError, BranchCutError, SolverError, SplashError
from .utils import dense_solve
from .utils import fourier_diff_matrix, perispecint, wrap_angle


LOGGER = logging.getLogger('SplashSqueeze')

DtNPair = namedtuple('DtNPair', ['n_minus', 'n_plus', 'n_res'])


class SingleLayerSolver(object):
    """Bordered single layer [[S, 1], [w^T, 0]]: densities with zero total
    charge plus a constant"""

    def __init__(self, curve, S=None):
        self._curve_id = curve.curve_id
        S = single_layer(curve) if S is None else S.check(curve)
        self._S = S
        n = curve.n_nodes
        self._w = curve.speed() * curve.h
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = S.matrix
        A[:n, n] = 1.0
        A[n, :n] = self._w
        self._A = A
        self._lu = lu_factor(A)

    @property
    def single_layer(self):
        return self._S

    @property
    def weights(self):
        return self._w

    def condition(self):
        return np.linalg.cond(self._A)

    def solve(self, g, total=0.0):
        """Returns (sigma, C) with S sigma + C = g and w^T sigma = total"""
        g = np.asarray(g, dtype=float)
        rhs = np.zeros((g.shape[0] + 1, ) + g.shape[1:])
        rhs[:-1] = g
        rhs[-1] = total
        x = lu_solve(self._lu, rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError('Single layer solve: non-finite density')
        return x[:-1], x[-1]

    def pinv(self, g):
        return self.solve(g)[0]


class OperatorCache(object):
    """Operators of the most recent curve, keyed by kind"""

    def __init__(self):
        self._curve_id = None
        self._ops = dict()

    def get(self, curve, kind, builder):
        if curve.curve_id != self._curve_id:
            self._ops = dict()
            self._curve_id = curve.curve_id
        if kind not in self._ops:
            self._ops[kind] = builder(curve)
        op = self._ops[kind]
        if isinstance(op, BoundaryOperator):
            op.check(curve)
        return op


def _parts(curve, solver=None, T=None):
    solver = SingleLayerSolver(curve) if solver is None else solver
    T = double_layer_T(curve) if T is None else T.check(curve)
    return solver, T


def dtn_minus(curve, solver=None, T=None):
    """Lagrangian Dirichlet-to-Neumann map of the region below Gamma (on the
    -N side), N the normal pointing out of the plasma: S^+(-1 + T)"""
    solver, T = _parts(curve, solver, T)
    n = curve.n_nodes
    M = solver.pinv(-np.eye(n) + T.matrix)
    return BoundaryOperator('DtNMinus', M, curve.curve_id)


def dtn_plus(curve, solver=None, T=None, delta=None, floor=None, cap=None):
    """Dirichlet-to-Neumann map of the region above Gamma, same normal:
    S^+(1 + T). Refused below the pinch floor or above the condition cap"""
    floor = TOLERANCES['dtn_plus_floor'] if floor is None else floor
    cap = TOLERANCES['condition_cap'] if cap is None else cap
    if not curve.is_closed:
        delta = pinch(curve).delta if delta is None else delta
        if delta < floor:
            raise IllConditionedError('Exterior DtN map requested at pinch %0.3e below floor %0.1e' %
                                      (delta, floor))
    solver, T = _parts(curve, solver, T)
    cond = solver.condition()
    if cond > cap:
        raise IllConditionedError('Single layer condition number %0.3e above %0.1e' % (cond, cap))
    n = curve.n_nodes
    M = solver.pinv(np.eye(n) + T.matrix)
    return BoundaryOperator('DtNPlus', M, curve.curve_id)


def n_res(curve, solver=None, T=None):
    """N_+ + N_- assembled as 2 S^+ T; the leading orders cancel so the
    operator stays bounded as the pinch closes"""
    solver, T = _parts(curve, solver, T)
    return BoundaryOperator('NRes', 2 * solver.pinv(T.matrix), curve.curve_id)


def dtn_pair(curve, delta=None):
    solver, T = _parts(curve)
    return DtNPair(dtn_minus(curve, solver, T), dtn_plus(curve, solver, T, delta=delta),
                   n_res(curve, solver, T))


def arclength_mean_projector(curve):
    """I - 1 w^T / sum(w); removes the arclength mean"""
    w = curve.speed() * curve.h
    n = curve.n_nodes
    return np.eye(n) - np.outer(np.ones(n), w) / w.sum()


def _hilbert_dtn(curve, solver=None, T=None):
    solver, T = _parts(curve, solver, T)
    n = curve.n_nodes
    s = curve.speed()
    D1 = fourier_diff_matrix(n)
    # N_- g = f  <=>  (-1 + T) g = S f + const, T 1 = 0 on a strip curve
    g = dense_solve(-np.eye(n) + T.matrix, np.dot(solver.single_layer.matrix, arclength_mean_projector(curve)),
                    name='interior Neumann system')
    return -np.dot(np.diag(1.0 / s), np.dot(D1, g))


class SqrtMap(object):
    """Image of the curve under O(z) = exp(-i pi/4) sqrt(i tan((z - z*)/2)).
    The cut leaves z* at angle `cut`: by default along the tangent at the
    kissing point, pointing from z* towards it, and straight up when the
    curve has no pinch below the square-root switchover. The branch is
    followed by continuity from node 0"""

    def __init__(self, curve, z_star, cut=None):
        self._curve = curve
        self._z_star = np.asarray(z_star, dtype=float)
        X = curve.points
        z = X[:, 0] + 1j * X[:, 1]
        zs = self._z_star[0] + 1j * self._z_star[1]
        self._cut = self._kissing_tangent(curve, self._z_star) if cut is None else float(cut)
        w = (z - zs) / 2
        # near z*, i tan(w) ~ i (z - z*) / 2; rotate the principal cut onto the ray
        phi = self._cut - 0.5 * np.pi
        r = np.exp(0.5j * phi) * np.sqrt(1j * np.tan(w) * np.exp(-1j * phi))
        rho = np.zeros_like(r)
        rho[0] = r[0]
        for j in range(1, r.shape[0]):
            rho[j] = self._continue(rho[j - 1], r[j], j)
        self._check_closure(rho)
        rot = np.exp(-1j * np.pi / 4)
        zeta = rot * rho
        xp = curve.derivative(1)
        zp = xp[:, 0] + 1j * xp[:, 1]
        self._zeta = zeta
        self._zeta_p = rot * 1j * zp / (4 * rho * np.cos(w) ** 2)
        self._image = GridCurve(np.vstack([zeta.real, zeta.imag]).T, shift=(0.0, 0.0))
        self._chord_arc = self._chord_arc_constant()

    @staticmethod
    def _kissing_tangent(curve, z_star):
        try:
            r = pinch(curve)
        except SplashError as e:
            LOGGER.debug('No kissing point for the square-root cut: %s' % e)
            return 0.5 * np.pi
        if r.delta >= TOLERANCES['sqrt_switchover']:
            return 0.5 * np.pi
        p = 0.5 * (curve.evaluate(r.theta_star) + curve.evaluate(r.vartheta_star) + r.period_shift * curve.shift)
        t = curve.evaluate(r.theta_star, 1)
        if np.dot(t, p - z_star) < 0:
            t = -t
        return float(np.arctan2(t[1], t[0]))

    @staticmethod
    def _continue(prev, root, j):
        da, db = abs(root - prev), abs(-root - prev)
        if min(da, db) > 0.5 * max(da, db):
            raise BranchCutError('Ambiguous square-root branch at node %s' % j)
        return root if da <= db else -root

    @staticmethod
    def _check_closure(rho):
        if abs(rho[0] - rho[-1]) > abs(-rho[0] - rho[-1]):
            raise BranchCutError('The curve winds around a branch point')

    def _chord_arc_constant(self):
        theta = self._curve.theta
        zeta = self._zeta
        n = zeta.shape[0]
        d = np.abs(zeta[:, np.newaxis] - zeta[np.newaxis, :])
        lab = np.abs(wrap_angle(theta[:, np.newaxis] - theta[np.newaxis, :]))
        off = ~np.eye(n, dtype=bool)
        return float((d[off] / lab[off]).min())

    @property
    def z_star(self):
        return self._z_star

    @property
    def cut_angle(self):
        return self._cut

    @property
    def image(self):
        return self._image

    @property
    def zeta(self):
        return self._zeta

    @property
    def zeta_prime(self):
        return self._zeta_p

    @property
    def chord_arc_constant(self):
        return self._chord_arc

    @property
    def orientation(self):
        z = self._zeta
        area = 0.5 * np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag)
        return 1.0 if area > 0 else -1.0


def sqrt_map(curve, z_star, cut=None):
    return SqrtMap(curve, z_star, cut=cut)


def _hilbert_sqrt(curve, z_star):
    sm = sqrt_map(curve, z_star)
    n = curve.n_nodes
    h = curve.h
    o = sm.orientation
    zeta, zp = sm.zeta, sm.zeta_prime
    diff = zeta[np.newaxis, :] - zeta[:, np.newaxis]
    np.fill_diagonal(diff, 1.0)
    A = o * h * zp[np.newaxis, :] / (2j * np.pi * diff)
    np.fill_diagonal(A, 0.0)
    D1 = fourier_diff_matrix(n)
    # boundary values of the Cauchy integral of a real density mu
    M = np.eye(n) + A - np.diag(A.sum(axis=1)) + o * h / (2j * np.pi) * D1
    s = curve.speed()
    Q = perispecint(np.eye(n))
    q = np.dot(Q, np.dot(np.diag(s), arclength_mean_projector(curve)))
    g = np.dot(M.imag, dense_solve(M.real, q, name='Cauchy integral system'))
    LOGGER.debug('Square-root map chord-arc constant %0.4e' % sm.chord_arc_constant)
    return -np.dot(np.diag(1.0 / s), np.dot(D1, g))


def hilbert_transform(curve, route='dtn', z_star=None, solver=None, T=None):
    """Hilbert transform of the curve: Hf = -(1/|X_theta|) d_theta g with
    N_- g = f - <f>. The 'sqrt' route builds it from a Cauchy integral on
    the image of the square-root map and remains usable at a splash"""
    if route == 'dtn':
        M = _hilbert_dtn(curve, solver, T)
    elif route == 'sqrt':
        if z_star is None:
            raise ValidationError('z_star: required by the square-root route')
        M = _hilbert_sqrt(curve, z_star)
    else:
        raise ValidationError('route: must be dtn or sqrt (got %r)' % route)
    return BoundaryOperator('Hilbert', M, curve.curve_id)


def stack(V):
    V = np.asarray(V, dtype=float)
    return np.hstack([V[:, 0], V[:, 1]])


def unstack(v):
    n = v.shape[0] // 2
    return np.vstack([v[:n], v[n:]]).T


class EOperator(object):
    """E V = (T.V + H(N.V), N.V) and its explicit inverse
    V = T (a - H b) + N b"""

    def __init__(self, curve, hilbert):
        hilbert.check(curve)
        F = frame(curve)
        T, N = F.tangent, F.normal
        H = hilbert.matrix
        E = np.block([[np.diag(T[:, 0]) + np.dot(H, np.diag(N[:, 0])),
                       np.diag(T[:, 1]) + np.dot(H, np.diag(N[:, 1]))],
                      [np.diag(N[:, 0]), np.diag(N[:, 1])]])
        Einv = np.block([[np.diag(T[:, 0]), -np.dot(np.diag(T[:, 0]), H) + np.diag(N[:, 0])],
                         [np.diag(T[:, 1]), -np.dot(np.diag(T[:, 1]), H) + np.diag(N[:, 1])]])
        self._hilbert = hilbert
        self._E = BoundaryOperator('EProj', E, curve.curve_id)
        self._Einv = BoundaryOperator('EProjInv', Einv, curve.curve_id)

    @property
    def hilbert(self):
        return self._hilbert

    @property
    def e_matrix(self):
        return self._E

    @property
    def e_inv_matrix(self):
        return self._Einv

    def apply(self, V):
        return unstack(self._E.dot(stack(V)))

    def inverse(self, W):
        return unstack(self._Einv.dot(stack(W)))


def build_E(curve, hilbert=None, route='dtn', z_star=None):
    if hilbert is None:
        hilbert = hilbert_transform(curve, route=route, z_star=z_star)
    return EOperator(curve, hilbert)


class HarmonicExtension(object):
    """Bounded harmonic extension of a trace f to one side of Gamma: '-'
    below (single layer plus constant), '+' above (double layer solving
    (-1 + T) mu = f)"""

    def __init__(self, curve, f, side, solver=None, T=None):
        if side not in ['-', '+']:
            raise ValidationError('side: must be - or + (got %r)' % side)
        self._curve = curve
        self._side = side
        f = np.asarray(f, dtype=float)
        if side == '-':
            solver = SingleLayerSolver(curve) if solver is None else solver
            self._density, self._const = solver.solve(f)
        else:
            T = double_layer_T(curve) if T is None else T.check(curve)
            self._density = dense_solve(-np.eye(curve.n_nodes) + T.matrix, f, name='double layer density')
            self._const = 0.0

    @property
    def side(self):
        return self._side

    @property
    def density(self):
        return self._density

    def __call__(self, targets):
        layer = 'single' if self._side == '-' else 'double'
        return evaluate_potential(self._curve, self._density, targets, layer=layer) + self._const

    def gradient(self, targets):
        if self._side != '-':
            raise ValidationError('gradient: only available below the curve')
        _, g = evaluate_potential(self._curve, self._density, targets, gradient=True)
        return g

    def normal_derivative(self):
        """d_N of the extension on Gamma from its own side"""
        Kp = adjoint_double_layer(self._curve).matrix
        if self._side == '-':
            return -self._density + np.dot(Kp, self._density)
        raise ValidationError('normal_derivative: use dtn_plus above the curve')


def harmonic_extension(curve, f, side, solver=None, T=None):
    return HarmonicExtension(curve, f, side, solver=solver, T=T)
