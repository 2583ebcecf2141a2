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
from functools import lru_cache
from .curve import frame, flat_line, resample
from .utils import TOLERANCES, ValidationError, SingularPointError, StaleCacheError, ResolutionError
from .utils import read_json, write_json


LOGGER = logging.getLogger('SplashSqueeze')

KernelEval = namedtuple('KernelEval', ['G', 'K', 'HilbK'])

OPERATOR_KINDS = ['SingleLayer', 'DoubleLayerT', 'DoubleLayerAdjoint', 'DtNMinus', 'DtNPlus',
                  'NRes', 'Hilbert', 'EProj', 'EProjInv']

# q below this makes log q meaningless in double precision
_SINGULAR_Q = 1e-28


def _kernel_parts(x):
    x = np.asarray(x, dtype=float)
    a = np.abs(x[..., 1])
    e = np.exp(-a)
    # q = 2 e^{-|x2|} (cosh x2 - cos x1), free of overflow
    q = np.expm1(-a) ** 2 + 4 * e * np.sin(x[..., 0] / 2) ** 2
    return x, a, e, q


def green(x):
    """G(x) = (1/pi) log|sin((x1 + i x2) / 2)|; 2 pi periodic in x1"""
    _, a, _, q = _kernel_parts(x)
    return (a - 2 * np.log(2) + np.log(q)) / (2 * np.pi)


def green_gradient(x):
    x, a, e, q = _kernel_parts(x)
    k1 = 2 * e * np.sin(x[..., 0]) / q
    k2 = np.sign(x[..., 1]) * -np.expm1(-2 * a) / q
    return np.stack([k1, k2], axis=-1) / (2 * np.pi)


def kernel(x):
    """Periodic Newtonian kernel: value, gradient and Hilbert kernel.

    The Hilbert kernel (1/2pi)(sin x1, sinh x2)/(cosh x2 - cos x1) coincides
    with the gradient; both are returned so callers can name what they use.

    >>> from SplashSqueeze.potential import kernel
    >>> k = kernel([3.141592653589793, 0.0])
    >>> abs(k.G) < 1e-15
    True
    """
    x = np.asarray(x, dtype=float)
    _, _, _, q = _kernel_parts(x)
    if np.any(q < _SINGULAR_Q):
        raise SingularPointError('Kernel evaluated at a lattice point x = %s' % (x.tolist(), ))
    K = green_gradient(x)
    return KernelEval(green(x), K, K.copy())


class BoundaryOperator(object):
    """Dense matrix acting on grid functions of one curve, tagged with the
    curve it was built from"""

    def __init__(self, kind, matrix, curve_id):
        if kind not in OPERATOR_KINDS:
            raise ValidationError('kind: unknown operator %r' % kind)
        self._kind = kind
        self._matrix = np.asarray(matrix)
        self._curve_id = curve_id

    @property
    def kind(self):
        return self._kind

    @property
    def matrix(self):
        return self._matrix

    @property
    def curve_id(self):
        return self._curve_id

    @property
    def n(self):
        return self._matrix.shape[1]

    def check(self, curve):
        if curve.curve_id != self._curve_id:
            raise StaleCacheError('%s built for curve %s used with curve %s' % (self._kind, self._curve_id,
                                                                              curve.curve_id))
        return self

    def dot(self, f):
        return np.dot(self._matrix, f)

    def __call__(self, f):
        return self.dot(f)

    def to_json(self):
        m = self._matrix
        data = dict(kind=self._kind, n=int(m.shape[1]), curve_id=self._curve_id)
        if np.iscomplexobj(m):
            data['matrix'] = m.real.tolist()
            data['matrix_imag'] = m.imag.tolist()
        else:
            data['matrix'] = m.tolist()
        return data

    @classmethod
    def from_json(cls, data):
        m = np.array(data['matrix'], dtype=float)
        if 'matrix_imag' in data:
            m = m + 1j * np.array(data['matrix_imag'], dtype=float)
        if m.ndim != 2 or m.shape[1] != data['n']:
            raise ValidationError('matrix: expected %s columns' % data['n'])
        return cls(data['kind'], m, data.get('curve_id'))

    def save(self, fname):
        write_json(fname, self.to_json())

    @classmethod
    def load(cls, fname):
        return cls.from_json(read_json(fname))


def kress_weights(n):
    """Product-quadrature weights R[d] for the factor log(4 sin^2((t_i - t_j)/2)),
    d = (i - j) mod n"""
    m = n // 2
    d = np.arange(n)
    j = np.arange(1, m)
    c = np.cos(2 * np.pi * np.outer(j, d) / n) / j[:, np.newaxis]
    return -(2 * np.pi / m) * c.sum(axis=0) - (np.pi / m ** 2) * (-1.0) ** d


def _differences(curve):
    X = curve.points
    diff = X[:, np.newaxis, :] - X[np.newaxis, :, :]
    n = curve.n_nodes
    # keep the kernel finite on the diagonal, overwritten by the callers
    diff[np.arange(n), np.arange(n)] = [np.pi, 0.0]
    return diff


def _single_layer_matrix(curve):
    n = curve.n_nodes
    h = curve.h
    s = curve.speed()
    theta = curve.theta
    G = green(_differences(curve))
    dth = theta[:, np.newaxis] - theta[np.newaxis, :]
    off = ~np.eye(n, dtype=bool)
    logfac = np.zeros((n, n))
    logfac[off] = np.log(4 * np.sin(dth[off] / 2) ** 2) / (2 * np.pi)
    smooth = G - logfac
    smooth[np.arange(n), np.arange(n)] = np.log(s / 2) / np.pi
    idx = (np.arange(n)[:, np.newaxis] - np.arange(n)[np.newaxis, :]) % n
    R = kress_weights(n)[idx]
    return (R / (2 * np.pi) + h * smooth) * s[np.newaxis, :]


def single_layer(curve, check_resolution=False, tol=None):
    """Nystrom matrix of Sf(x) = int_Gamma G(x - y) f(y) dS(y) with a
    product-quadrature rule for the logarithmic singularity"""
    A = _single_layer_matrix(curve)
    if check_resolution:
        tol = TOLERANCES['self_convergence'] if tol is None else tol
        fine = curve.resample(2 * curve.n_nodes)
        f = np.cos(curve.theta)
        a = np.dot(A, f)
        b = np.dot(_single_layer_matrix(fine), np.cos(fine.theta))[::2]
        err = np.abs(a - b).max()
        if err > tol:
            raise ResolutionError('Single layer self-convergence %0.3e above %0.1e (n=%s)' %
                                  (err, tol, curve.n_nodes))
    return BoundaryOperator('SingleLayer', A, curve.curve_id)


def _normal_kernel(curve, side):
    F = frame(curve)
    n = curve.n_nodes
    K = green_gradient(_differences(curve))
    w = F.speed * curve.h
    if side == 'source':
        # -n_y . K(x - y)
        M = -(K * F.normal[np.newaxis, :, :]).sum(axis=-1) * w[np.newaxis, :]
    else:
        M = (K * F.normal[:, np.newaxis, :]).sum(axis=-1) * w[np.newaxis, :]
    M[np.arange(n), np.arange(n)] = -F.curvature * w / (2 * np.pi)
    return M


def double_layer_T(curve):
    """Nystrom matrix of Tf(x) = -int_Gamma dG/dn_y(x - y) f(y) dS(y).

    With N = perp(X_theta), limits from the two sides of Gamma are (1 + T)f
    on the -N side and (-1 + T)f on the +N side."""
    return BoundaryOperator('DoubleLayerT', _normal_kernel(curve, 'source'), curve.curve_id)


def adjoint_double_layer(curve):
    """K'f(x) = int_Gamma dG/dn_x(x - y) f(y) dS(y); single layer normal
    derivatives are +-f + K'f"""
    return BoundaryOperator('DoubleLayerAdjoint', _normal_kernel(curve, 'target'), curve.curve_id)


def cross_single_layer(source, targets):
    """Trapezoid single layer from `source` to well separated points"""
    targets = np.atleast_2d(targets)
    diff = targets[:, np.newaxis, :] - source.points[np.newaxis, :, :]
    return green(diff) * (source.speed() * source.h)[np.newaxis, :]


def cross_gradient(source, targets):
    """Trapezoid gradient of the single layer, shape (m, n, 2)"""
    targets = np.atleast_2d(targets)
    diff = targets[:, np.newaxis, :] - source.points[np.newaxis, :, :]
    return green_gradient(diff) * (source.speed() * source.h)[np.newaxis, :, np.newaxis]


def cross_double_layer(source, targets):
    """Trapezoid -n_y . K(x - y) from `source` to well separated points"""
    targets = np.atleast_2d(targets)
    F = frame(source)
    diff = targets[:, np.newaxis, :] - source.points[np.newaxis, :, :]
    K = green_gradient(diff)
    return -(K * F.normal[np.newaxis, :, :]).sum(axis=-1) * (F.speed * source.h)[np.newaxis, :]


def curve_distance(curve, targets):
    """Distance from each target to the nodes of the curve; the kernel is
    periodic in x1 so differences are wrapped"""
    targets = np.atleast_2d(targets)
    diff = targets[:, np.newaxis, :] - curve.points[np.newaxis, :, :]
    diff[..., 0] = np.mod(diff[..., 0] + np.pi, 2 * np.pi) - np.pi
    return np.hypot(diff[..., 0], diff[..., 1]).min(axis=1)


def _refinement(curve, dist, ratio, cap):
    n = curve.n_nodes
    smax = curve.speed().max()
    need = ratio * smax * curve.h * n / (2 * np.pi * np.maximum(dist, 1e-300))
    need = np.maximum(need, n)
    m = 2 ** np.ceil(np.log2(need))
    capped = m > cap
    if np.any(capped):
        LOGGER.warning('Near-field upsampling capped at %s nodes for %s targets (min distance %0.3e)' %
                       (cap, capped.sum(), dist.min()))
    return np.minimum(m, cap).astype(int)


def evaluate_potential(curve, density, targets, layer='single', gradient=False, near_field_ratio=None,
                       upsample_cap=None, chunk=256):
    """Single or double layer potential of `density` at off-curve targets.

    Targets close to the curve (relative to the node spacing) are evaluated
    with the density trigonometrically interpolated to a finer grid. Returns
    values, or (values, gradients) when `gradient` is set (single layer)."""
    if layer not in ['single', 'double']:
        raise ValidationError('layer: must be single or double (got %r)' % layer)
    if gradient and layer != 'single':
        raise ValidationError('gradient: only available for the single layer')
    ratio = TOLERANCES['near_field_ratio'] if near_field_ratio is None else near_field_ratio
    cap = TOLERANCES['upsample_cap'] if upsample_cap is None else upsample_cap
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    density = np.asarray(density, dtype=float)
    dist = curve_distance(curve, targets)
    if np.any(dist == 0):
        raise SingularPointError('Target on the curve')
    levels = _refinement(curve, dist, ratio, cap)
    values = np.zeros(targets.shape[0])
    grads = np.zeros((targets.shape[0], 2))
    for m in np.unique(levels):
        idx = np.where(levels == m)[0]
        fine = curve.resample(m) if m != curve.n_nodes else curve
        f = resample(density, m)
        for start in range(0, idx.shape[0], chunk):
            sel = idx[start:start + chunk]
            if layer == 'single':
                values[sel] = np.dot(cross_single_layer(fine, targets[sel]), f)
                if gradient:
                    grads[sel] = np.einsum('ijk,j->ik', cross_gradient(fine, targets[sel]), f)
            else:
                values[sel] = np.dot(cross_double_layer(fine, targets[sel]), f)
    if gradient:
        return values, grads
    return values


def measure_jump(curve, density, node, eps):
    """Double layer values at X_node -+ eps N; returns (below, above)"""
    F = frame(curve)
    x = curve.points[node]
    pts = np.vstack([x - eps * F.normal[node], x + eps * F.normal[node]])
    v = evaluate_potential(curve, density, pts, layer='double')
    return v[0], v[1]


@lru_cache(maxsize=1)
def jump_constant():
    """Jump of the double layer across a flat line for the cos(theta) density,
    extrapolated to zero distance: (D_below - D_above) / (2 f)"""
    curve = flat_line(64)
    f = np.cos(curve.theta)
    node = curve.n_nodes // 2
    eps = np.array([1e-2, 1e-3, 1e-4])
    est = []
    for e in eps:
        below, above = measure_jump(curve, f, node, e)
        est.append((below - above) / (2 * f[node]))
    c = float(np.polyfit(eps, est, 1)[1])
    LOGGER.info('Double layer jump constant %0.12f' % c)
    return c
