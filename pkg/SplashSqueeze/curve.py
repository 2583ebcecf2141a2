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
import hashlib
from collections import namedtuple
from scipy.interpolate import CubicHermiteSpline
from .utils import TOLERANCES, wrap_angle, wavenumbers, read_json, write_json
from .utils import ValidationError, DegenerateCurveError, NoBracketError, ConvergenceError


LOGGER = logging.getLogger('SplashSqueeze')

FrameData = namedtuple('FrameData', ['tangent', 'normal', 'speed', 'curvature'])
PinchReport = namedtuple('PinchReport', ['delta', 'theta_star', 'vartheta_star', 'glancing',
                                         'normal_at_pinch', 'period_shift'])
SplashParameters = namedtuple('SplashParameters', ['t_S', 'theta_S', 'vartheta_S', 'p_S'])


def theta_grid(n):
    return -np.pi + 2 * np.pi * np.arange(n) / n


def perp(v):
    """Rotation by +pi/2 of the last axis: (v1, v2) -> (-v2, v1)"""
    v = np.asarray(v)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def tail_ratio(fh, band_limit):
    """Largest Fourier amplitude above band_limit relative to the largest one"""
    n = fh.shape[0]
    amp = np.abs(fh).reshape(n, -1).max(axis=1)
    top = amp.max()
    if top == 0:
        return 0.0
    mask = np.abs(wavenumbers(n)) > band_limit
    if not mask.any():
        return 0.0
    return amp[mask].max() / top


def spectral_derivative(f, order=1, band_limit=None, tol=None):
    """Fourier collocation derivative along axis 0 of samples on theta_grid"""
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    band_limit = n // 3 if band_limit is None else band_limit
    tol = TOLERANCES['spectral_tail'] if tol is None else tol
    fh = np.fft.fft(f, axis=0)
    r = tail_ratio(fh, band_limit)
    if r > tol:
        LOGGER.warning('Spectral tail %0.3e above %0.1e (N=%s, band limit %s)' % (r, tol, n, band_limit))
    if order == 0:
        return f.copy()
    mult = (1j * wavenumbers(n)) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[n // 2] = 0
    mult = mult.reshape((n,) + (1,) * (f.ndim - 1))
    return np.real(np.fft.ifft(fh * mult, axis=0))


def resample(f, m):
    """Trigonometric interpolation of grid samples (axis 0) onto m nodes"""
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if m == n:
        return f.copy()
    fh = np.fft.fft(f, axis=0)
    out = np.zeros((m, ) + f.shape[1:], dtype=complex)
    k = min(n, m) // 2
    out[:k] = fh[:k]
    out[m - k + 1:] = fh[n - k + 1:]
    if m > n:
        out[k] = 0.5 * fh[k]
        out[m - k] = 0.5 * fh[k]
    else:
        out[k] = fh[k] + fh[n - k]
    return np.real(np.fft.ifft(out, axis=0)) * (float(m) / n)


class GridCurve(object):
    """Uniformly sampled periodic curve X(theta_j), theta_j = -pi + 2 pi j / N.

    `shift` is the jump X(theta + 2 pi) - X(theta): (2 pi, 0) for the
    x1-periodic interfaces and 0 for closed curves."""

    def __init__(self, points, shift=(2 * np.pi, 0.0), band_limit=None, time=0.0):
        points = np.array(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValidationError('points: expected an (N, 2) array (got shape %s)' % (points.shape, ))
        n = points.shape[0]
        if n < 8 or n % 2:
            raise ValidationError('n_nodes: must be an even integer >= 8 (got %s)' % n)
        if not np.all(np.isfinite(points)):
            raise ValidationError('points: non-finite samples')
        points.flags.writeable = False
        self._points = points
        self._shift = np.array(shift, dtype=float)
        self._band_limit = n // 3 if band_limit is None else int(band_limit)
        self._time = float(time)
        self._derivatives = {}
        self._coef = None
        self._curve_id = None

    @property
    def n_nodes(self):
        return self._points.shape[0]

    @property
    def points(self):
        return self._points

    @property
    def shift(self):
        return self._shift

    @property
    def band_limit(self):
        return self._band_limit

    @property
    def time(self):
        return self._time

    @property
    def theta(self):
        return theta_grid(self.n_nodes)

    @property
    def h(self):
        "Label spacing"
        return 2 * np.pi / self.n_nodes

    @property
    def is_closed(self):
        return not np.any(self._shift)

    @property
    def curve_id(self):
        if self._curve_id is None:
            m = hashlib.sha1(self._points.tobytes())
            m.update(self._shift.tobytes())
            self._curve_id = m.hexdigest()[:16]
        return self._curve_id

    def periodic_part(self):
        return self._points - np.outer(self.theta, self._shift) / (2 * np.pi)

    def derivative(self, order=1):
        if order not in self._derivatives:
            d = spectral_derivative(self.periodic_part(), order, band_limit=self._band_limit)
            if order == 1:
                d = d + self._shift / (2 * np.pi)
            elif order == 0:
                d = self._points.copy()
            self._derivatives[order] = d
        return self._derivatives[order]

    def speed(self):
        d = self.derivative(1)
        return np.hypot(d[:, 0], d[:, 1])

    def tail_ratio(self):
        return tail_ratio(np.fft.fft(self.periodic_part(), axis=0), self._band_limit)

    def evaluate(self, theta, derivative=0):
        """Trigonometric interpolant (or its derivative) at arbitrary labels"""
        scalar = np.ndim(theta) == 0
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        n = self.n_nodes
        if self._coef is None:
            self._coef = np.fft.fft(self.periodic_part(), axis=0) / n
        k = wavenumbers(n)
        k[n // 2] = n // 2
        E = np.exp(1j * np.outer(theta + np.pi, k)) * (1j * k) ** derivative
        res = np.real(np.dot(E, self._coef))
        if derivative == 0:
            res += np.outer(theta, self._shift) / (2 * np.pi)
        elif derivative == 1:
            res += self._shift / (2 * np.pi)
        return res[0] if scalar else res

    def with_points(self, points, time=None):
        time = self._time if time is None else time
        return GridCurve(points, shift=self._shift, band_limit=self._band_limit, time=time)

    def resample(self, m):
        pts = resample(self.periodic_part(), m) + np.outer(theta_grid(m), self._shift) / (2 * np.pi)
        return GridCurve(pts, shift=self._shift, band_limit=m // 2, time=self._time)

    def translate(self, v):
        return self.with_points(self._points + np.asarray(v, dtype=float))

    def to_json(self):
        return dict(n_nodes=self.n_nodes, points=self._points.tolist(),
                    time=self._time, shift=self._shift.tolist())

    @classmethod
    def from_json(cls, data):
        try:
            points = data['points']
            n = data['n_nodes']
        except KeyError as e:
            raise ValidationError('%s: missing field' % e.args[0])
        if n != len(points):
            raise ValidationError('n_nodes: %s does not match %s points' % (n, len(points)))
        return cls(points, shift=data.get('shift', (2 * np.pi, 0.0)), time=data.get('time', 0.0))

    def save(self, fname):
        write_json(fname, self.to_json())

    @classmethod
    def load(cls, fname):
        return cls.from_json(read_json(fname))


def flat_line(n, height=0.0):
    theta = theta_grid(n)
    return GridCurve(np.vstack([theta, np.full(n, height)]).T)


def circle(n, radius=1.0, center=(0.0, 0.0)):
    "Counter-clockwise circle"
    return ellipse(n, radius, radius, center=center)


def ellipse(n, a, b, center=(0.0, 0.0)):
    theta = theta_grid(n)
    pts = np.vstack([center[0] + a * np.cos(theta), center[1] + b * np.sin(theta)]).T
    return GridCurve(pts, shift=(0.0, 0.0))


def from_function(n, func, shift=(2 * np.pi, 0.0), time=0.0, band_limit=None):
    """Samples func(theta) -> (x1, x2) on the uniform grid"""
    theta = theta_grid(n)
    x1, x2 = func(theta)
    pts = np.vstack([np.broadcast_to(x1, theta.shape), np.broadcast_to(x2, theta.shape)]).T
    return GridCurve(pts, shift=shift, time=time, band_limit=band_limit)


def frame(curve, speed_min=None):
    speed_min = TOLERANCES['speed_min'] if speed_min is None else speed_min
    xp = curve.derivative(1)
    xpp = curve.derivative(2)
    s = np.hypot(xp[:, 0], xp[:, 1])
    if s.min() < speed_min:
        j = int(np.argmin(s))
        raise DegenerateCurveError('|X_theta| = %0.3e below %0.1e at node %s' % (s[j], speed_min, j))
    T = xp / s[:, np.newaxis]
    kappa = (xp[:, 0] * xpp[:, 1] - xp[:, 1] * xpp[:, 0]) / s ** 3
    return FrameData(T, perp(T), s, kappa)


def _label_gap(curve, theta, vartheta, m):
    if curve.is_closed:
        return wrap_angle(theta - vartheta)
    return theta - vartheta - 2 * np.pi * m


def _pair_distance(curve, theta, vartheta, m):
    d = curve.evaluate(theta) - curve.evaluate(vartheta) - m * curve.shift
    return np.sqrt(np.dot(d, d))


def _refine_pair(curve, theta, vartheta, m, separation, max_iter=40):
    """Levenberg-Marquardt descent of |X(theta) - X(vartheta) - m shift|^2 / 2"""
    h = curve.h
    shift = curve.shift
    best = _pair_distance(curve, theta, vartheta, m)
    lam = 1e-3
    for _ in range(max_iter):
        x1 = curve.evaluate(theta)
        x1p = curve.evaluate(theta, 1)
        x1pp = curve.evaluate(theta, 2)
        x2 = curve.evaluate(vartheta)
        x2p = curve.evaluate(vartheta, 1)
        x2pp = curve.evaluate(vartheta, 2)
        d = x1 - x2 - m * shift
        g = np.array([np.dot(d, x1p), -np.dot(d, x2p)])
        c = -np.dot(x1p, x2p)
        H = np.array([[np.dot(x1p, x1p) + np.dot(d, x1pp), c],
                      [c, np.dot(x2p, x2p) - np.dot(d, x2pp)]])
        improved = False
        while lam < 1e12:
            A = H + lam * np.diag(np.abs(np.diag(H)) + 1e-14)
            try:
                step = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            norm = np.sqrt(np.dot(step, step))
            if norm > h:
                step *= h / norm
                norm = h
            th, vt = theta + step[0], vartheta + step[1]
            gap = _label_gap(curve, th, vt, m)
            if abs(gap) < separation:
                # slide back onto |gap| = separation
                corr = 0.5 * (separation - abs(gap)) * (1.0 if gap >= 0 else -1.0)
                th, vt = th + corr, vt - corr
            dist = _pair_distance(curve, th, vt, m)
            if dist < best:
                best, theta, vartheta = dist, th, vt
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 10
        if not improved or norm < 1e-14:
            break
    return best, theta, vartheta


def _canonical_pair(curve, theta, vartheta, m):
    tw, vw = wrap_angle(theta), wrap_angle(vartheta)
    if not curve.is_closed:
        a = int(np.round((theta - tw) / (2 * np.pi)))
        b = int(np.round((vartheta - vw) / (2 * np.pi)))
        m = m + b - a
    else:
        m = 0
    if tw < vw:
        tw, vw, m = vw, tw, -m
    return float(tw), float(vw), m


def _coarse_pairs(curve, separation, ncandidates):
    X = curve.points
    theta = curve.theta
    n = curve.n_nodes
    shifts = [0] if curve.is_closed else [-1, 0, 1]
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
    cand = []
    for m in shifts:
        diff = X[:, np.newaxis, :] - X[np.newaxis, :, :] - m * curve.shift
        dist = np.hypot(diff[..., 0], diff[..., 1])
        gap = _label_gap(curve, theta[:, np.newaxis], theta[np.newaxis, :], m)
        if curve.is_closed:
            mask = (I > J) & (np.abs(gap) >= separation)
        else:
            mask = gap >= separation
        dist = np.where(mask, dist, np.inf)
        for idx in np.argsort(dist, axis=None)[:4 * ncandidates]:
            i, j = np.unravel_index(idx, dist.shape)
            if np.isfinite(dist[i, j]):
                cand.append((dist[i, j], i, j, m))
    cand.sort(key=lambda x: x[0])
    res = []
    for c in cand:
        close = [r for r in res if r[3] == c[3] and abs(r[1] - c[1]) <= 3 and abs(r[2] - c[2]) <= 3]
        if len(close) == 0:
            res.append(c)
        if len(res) == ncandidates:
            break
    return res


def pinch(curve, separation=None, ncandidates=4, guess=None):
    """Pinch of the curve: minimal distance between labels at least
    `separation` apart, refined off the grid. A `guess` (theta, vartheta, m)
    skips the global search and refines that pair only"""
    separation = TOLERANCES['pinch_separation'] if separation is None else separation
    theta = curve.theta
    best = None
    if guess is None:
        starts = [(theta[i], theta[j], m) for _, i, j, m in _coarse_pairs(curve, separation, ncandidates)]
    else:
        starts = [tuple(guess)]
    for th0, vt0, m in starts:
        r = _refine_pair(curve, th0, vt0, m, separation)
        if best is None or r[0] < best[0][0]:
            best = (r, m)
    if best is None:
        raise ValidationError('separation: no label pair at distance >= %s' % separation)
    (delta, th, vt), m = best
    th, vt, m = _canonical_pair(curve, th, vt, m)
    xp = curve.evaluate(th, 1)
    normal = perp(xp) / np.sqrt(np.dot(xp, xp))
    G = glancing(curve, pair=(th, vt))
    return PinchReport(float(delta), th, vt, G, normal, m)


def glancing(curve, pair=None):
    """Hybrid chord-arc / pull-away functional; small when the curve
    approaches itself away from the labels (pi/2, -pi/2)"""
    X = curve.points
    theta = curve.theta
    shifts = [0] if curve.is_closed else [-1, 0, 1]
    dist = None
    for m in shifts:
        diff = X[:, np.newaxis, :] - X[np.newaxis, :, :] - m * curve.shift
        d = np.hypot(diff[..., 0], diff[..., 1])
        dist = d if dist is None else np.minimum(dist, d)
    lab = np.abs(wrap_angle(theta[:, np.newaxis] - theta[np.newaxis, :]))
    den = wrap_angle(theta[:, np.newaxis] - np.pi / 2) ** 2 + wrap_angle(theta[np.newaxis, :] + np.pi / 2) ** 2
    off = (lab > 0) & (den >= 1e-14)
    lab = np.where(lab > 0, lab, 1.0)
    den = np.where(den >= 1e-14, den, 1.0)
    value = np.where(off, dist / lab + dist / den, np.inf)
    res = min(value.min(), curve.speed().min())
    if pair is not None:
        th, vt = pair
        den = wrap_angle(th - np.pi / 2) ** 2 + wrap_angle(vt + np.pi / 2) ** 2
        lab = abs(wrap_angle(th - vt))
        if den > curve.h ** 2 and lab > 0:
            d = min([_pair_distance(curve, th, vt, m) for m in shifts])
            res = min(res, d / lab + d / den)
    return float(res)


def c1_distance(curve, reference):
    if curve.n_nodes != reference.n_nodes:
        raise ValidationError('n_nodes: curves sampled on different grids (%s, %s)' % (curve.n_nodes,
                                                                                   reference.n_nodes))
    a = np.abs(curve.points - reference.points).max()
    b = np.abs(curve.derivative(1) - reference.derivative(1)).max()
    return max(a, b)


def glancing_permitted(curve, reference, r0):
    """Admissibility of curve against the initial interface reference"""
    if c1_distance(curve, reference) > r0:
        return False
    return glancing(curve) >= 0.5 * glancing(reference)


class _TimeInterpolant(object):
    """Cubic Hermite interpolation in time of node samples; trigonometric
    interpolation in theta"""

    def __init__(self, trajectory):
        self._curves = [c for c, _ in trajectory]
        c0 = self._curves[0]
        self._shift = c0.shift
        self._band_limit = c0.band_limit
        t = np.array([c.time for c in self._curves])
        X = np.array([c.points for c in self._curves])
        U = np.array([np.asarray(u, dtype=float) for _, u in trajectory])
        self._spline = CubicHermiteSpline(t, X, U, axis=0)
        self._dspline = self._spline.derivative()

    def curves(self, t):
        X = GridCurve(self._spline(t), shift=self._shift, band_limit=self._curves[0].n_nodes // 2, time=t)
        U = GridCurve(self._dspline(t), shift=(0.0, 0.0), band_limit=self._curves[0].n_nodes // 2, time=t)
        return X, U


def _splash_system(interp, t, theta, vartheta, m):
    X, U = interp.curves(t)
    shift = X.shift
    x1, x2 = X.evaluate(theta), X.evaluate(vartheta)
    x1p, x2p = X.evaluate(theta, 1), X.evaluate(vartheta, 1)
    x1pp, x2pp = X.evaluate(theta, 2), X.evaluate(vartheta, 2)
    u1, u2 = U.evaluate(theta), U.evaluate(vartheta)
    u1p, u2p = U.evaluate(theta, 1), U.evaluate(vartheta, 1)
    Z = np.hstack([x1 - x2 - m * shift, np.dot(x1p, perp(x2p))])
    Jm = np.zeros((3, 3))
    Jm[:2, 0] = u1 - u2
    Jm[:2, 1] = x1p
    Jm[:2, 2] = -x2p
    Jm[2, 0] = np.dot(u1p, perp(x2p)) + np.dot(x1p, perp(u2p))
    Jm[2, 1] = np.dot(x1pp, perp(x2p))
    Jm[2, 2] = np.dot(x1p, perp(x2pp))
    return Z, Jm, X


def splash_root(trajectory, root_tol=None, bracket_tol=None, max_iter=None, history=None):
    """Splash time and labels from a sequence of (GridCurve, U = X_t) samples.

    Newton iteration on Z = (X(t, theta) - X(t, vartheta),
    X_theta(t, theta) . perp(X_theta(t, vartheta))). Residual norms are
    appended to `history` when given."""
    root_tol = TOLERANCES['root_tol'] if root_tol is None else root_tol
    bracket_tol = TOLERANCES['bracket_tol'] if bracket_tol is None else bracket_tol
    max_iter = TOLERANCES['newton_max_iter'] if max_iter is None else max_iter
    if len(trajectory) < 2:
        raise NoBracketError('Need at least two trajectory samples (got %s)' % len(trajectory))
    times = np.array([c.time for c, _ in trajectory])
    reports = [pinch(c) for c, _ in trajectory]
    deltas = np.array([r.delta for r in reports])
    below = np.where(deltas <= bracket_tol)[0]
    if below.shape[0]:
        k = below[0]
        t = times[k]
    else:
        dt = times[-1] - times[-2]
        slope = (deltas[-1] - deltas[-2]) / dt
        if slope >= 0:
            raise NoBracketError('Pinch is not decreasing (%0.3e -> %0.3e)' % (deltas[-2], deltas[-1]))
        k = len(trajectory) - 1
        t = times[-1] - deltas[-1] / slope
        reach = max(1.5 * dt, TOLERANCES['extrapolation_window'] * (times[-1] - times[0]))
        if t - times[-1] > reach:
            raise NoBracketError('Extrapolated splash time %0.4e lies beyond the window (t <= %0.4e)' %
                                 (t, times[-1]))
    r = reports[k]
    x = np.array([t, r.theta_star, r.vartheta_star])
    m = r.period_shift
    interp = _TimeInterpolant(trajectory)
    LOGGER.info('splash_root: guess t=%0.6e labels (%0.4f, %0.4f)' % tuple(x))
    for _ in range(max_iter + 1):
        Z, Jm, X = _splash_system(interp, x[0], x[1], x[2], m)
        nz = np.sqrt(np.dot(Z, Z))
        if history is not None:
            history.append(nz)
        if nz <= root_tol:
            p = X.evaluate(x[1])
            return SplashParameters(float(x[0]), float(wrap_angle(x[1])),
                                    float(wrap_angle(x[2])), p)
        try:
            x = x + np.linalg.solve(Jm, -Z)
        except np.linalg.LinAlgError:
            raise ConvergenceError('Singular splash Jacobian at t=%0.6e' % x[0])
    raise ConvergenceError('splash_root did not converge in %s iterations (|Z| = %0.3e)' % (max_iter, nz))


def distance_to_curve(curve, point, max_iter=20):
    """Distance from point to the curve (its period copies included), refined
    off the grid by Newton's method on the foot label"""
    point = np.asarray(point, dtype=float)
    X = curve.points
    shifts = [0] if curve.is_closed else [-1, 0, 1]
    best = None
    for m in shifts:
        d = np.hypot(*(X + m * curve.shift - point).T)
        j = int(np.argmin(d))
        if best is None or d[j] < best[0]:
            best = (d[j], j, m)
    _, j, m = best
    th = curve.theta[j]
    for _ in range(max_iter):
        d = curve.evaluate(th) + m * curve.shift - point
        xp = curve.evaluate(th, 1)
        xpp = curve.evaluate(th, 2)
        g = np.dot(d, xp)
        H = np.dot(xp, xp) + np.dot(d, xpp)
        if H <= 0:
            break
        step = np.clip(-g / H, -curve.h, curve.h)
        th += step
        if abs(step) < 1e-14:
            break
    d = curve.evaluate(th) + m * curve.shift - point
    return float(min(np.sqrt(np.dot(d, d)), best[0]))
