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
import csv
from collections import namedtuple
from scipy.linalg import lu_factor, lu_solve
from .curve import GridCurve, frame, pinch, flat_line, circle, perp, distance_to_curve, spectral_derivative
from .potential import single_layer, cross_single_layer, adjoint_double_layer, evaluate_potential
from .fieldop import dtn_plus, harmonic_extension
from .utils import TOLERANCES, ValidationError, IllConditionedError, CirculationSingularError
from .utils import ProbeGeometryError, FamilyTooShortError, wrap_angle, dense_solve


LOGGER = logging.getLogger('SplashSqueeze')

SqueezeReport = namedtuple('SqueezeReport', ['delta', 'gap_mid_h', 'weighted_sup_m1', 'weighted_sup_m2',
                                             'whitney_count', 'lambda1', 'lambda2', 'circ1', 'circ2'])

SQUEEZE_COLUMNS = ['delta', 'gap_mid_h', 'weighted_sup_m1', 'weighted_sup_m2', 'lambda1', 'lambda2',
                   'circ1', 'circ2']


class WallSet(object):
    """Perfectly conducting walls: W1 a horizontal line, W2 a counterclockwise
    circle. Either may be absent"""

    def __init__(self, w1=None, w2=None):
        self._w1 = w1
        self._w2 = w2

    @classmethod
    def default(cls, height=10.0, center=(0.0, 1.0), radius=0.1, nodes=(64, 64)):
        w1 = None if height is None else flat_line(nodes[0], height)
        w2 = None if radius is None else circle(nodes[1], radius=radius, center=center)
        return cls(w1, w2)

    @classmethod
    def from_config(cls, config):
        return cls.default(height=config.wall_height, center=config.wall_center,
                           radius=config.wall_radius, nodes=config.wall_nodes)

    @property
    def w1(self):
        return self._w1

    @property
    def w2(self):
        return self._w2

    @property
    def walls(self):
        return [w for w in [self._w1, self._w2] if w is not None]

    @property
    def names(self):
        return [k for k, w in [('w1', self._w1), ('w2', self._w2)] if w is not None]

    def check(self, curve, clearance=None):
        """Walls must stay clear of the interface"""
        clearance = TOLERANCES['probe_clearance'] if clearance is None else clearance
        if self._w2 is not None:
            center = self._w2.points.mean(axis=0)
            radius = np.hypot(*(self._w2.points[0] - center))
            d = distance_to_curve(curve, center)
            if d <= radius * (1 + clearance):
                raise ValidationError('walls: W2 (radius %0.3e) is %0.3e from the interface' % (radius, d))
        if self._w1 is not None:
            top = self._w1.points[:, 1].min()
            if curve.points[:, 1].max() >= top:
                raise ValidationError('walls: the interface reaches the W1 line x2 = %s' % top)
        return self


class VacuumSolution(object):
    """Stream function Psi = sum_c S_c sigma_c + C of the vacuum field
    h = perp(grad Psi), Psi = 0 on Gamma and lambda_i on the walls"""

    def __init__(self, curve, walls, densities, const, lambdas, circulations):
        self._curve = curve
        self._walls = walls
        self._densities = densities
        self._const = const
        self._lambdas = lambdas
        self._circulations = circulations
        self._logger = logging.getLogger('SplashSqueeze')

    @classmethod
    def zero(cls, curve, walls=None):
        walls = WallSet() if walls is None else walls
        dens = [np.zeros(c.n_nodes) for c in [curve] + walls.walls]
        return cls(curve, walls, dens, 0.0, np.zeros(len(walls.walls)), np.zeros(len(walls.walls)))

    @property
    def curve(self):
        return self._curve

    @property
    def walls(self):
        return self._walls

    @property
    def densities(self):
        return self._densities

    @property
    def const(self):
        return self._const

    @property
    def lambdas(self):
        return self._lambdas

    def _wall_value(self, name, values):
        names = self._walls.names
        return float(values[names.index(name)]) if name in names else float('nan')

    @property
    def lambda1(self):
        return self._wall_value('w1', self._lambdas)

    @property
    def lambda2(self):
        return self._wall_value('w2', self._lambdas)

    @property
    def circulations(self):
        return self._circulations

    @property
    def circulation1(self):
        return self._wall_value('w1', self._circulations)

    @property
    def circulation2(self):
        return self._wall_value('w2', self._circulations)

    @property
    def is_zero(self):
        return all([not np.any(d) for d in self._densities])

    def components(self):
        return list(zip([self._curve] + self._walls.walls, self._densities))

    def stream(self, targets):
        targets = np.atleast_2d(targets)
        res = np.full(targets.shape[0], self._const)
        for c, sigma in self.components():
            res += evaluate_potential(c, sigma, targets)
        return res

    def gradient(self, targets):
        targets = np.atleast_2d(targets)
        res = np.zeros((targets.shape[0], 2))
        for c, sigma in self.components():
            _, g = evaluate_potential(c, sigma, targets, gradient=True)
            res += g
        return res

    def h(self, targets):
        return perp(self.gradient(targets))

    def energy(self):
        """Half the Dirichlet integral of Psi over the vacuum"""
        return -0.5 * float(np.dot(self._lambdas, self._circulations))


def _system(components):
    sizes = [c.n_nodes for c in components]
    off = np.cumsum([0] + sizes)
    n = off[-1]
    A = np.zeros((n + 1, n + 1))
    for a, ca in enumerate(components):
        for b, cb in enumerate(components):
            if a == b:
                block = single_layer(ca).matrix
            else:
                block = cross_single_layer(cb, ca.points)
            A[off[a]:off[a + 1], off[b]:off[b + 1]] = block
        A[off[a]:off[a + 1], n] = 1.0
        A[n, off[a]:off[a + 1]] = ca.speed() * ca.h
    return A, off


def solve_vacuum(curve, walls=None, delta=None, floor=None):
    """Vacuum field with unit circulations around the walls.

    Two capacitance problems (Psi_i = 1 on W_i, 0 elsewhere) are solved with
    one factorization; the wall constants follow from matching both
    circulations to one."""
    walls = WallSet.default() if walls is None else walls
    floor = TOLERANCES['dtn_plus_floor'] if floor is None else floor
    if delta is not None and delta < floor:
        raise IllConditionedError('Vacuum solve at pinch %0.3e below floor %0.1e' % (delta, floor))
    if len(walls.walls) == 0:
        return VacuumSolution.zero(curve, walls)
    comps = [curve] + walls.walls
    A, off = _system(comps)
    lu = lu_factor(A)
    k = len(walls.walls)
    rhs = np.zeros((A.shape[0], k))
    for i in range(k):
        rhs[off[i + 1]:off[i + 2], i] = 1.0
    basis = lu_solve(lu, rhs)
    Mc = np.zeros((k, k))
    for i in range(k):
        w = comps[i + 1].speed() * comps[i + 1].h
        Mc[i] = 2 * np.dot(w, basis[off[i + 1]:off[i + 2]])
    if np.linalg.cond(Mc) > 1.0 / TOLERANCES['circulation_singular']:
        raise CirculationSingularError('Circulation matrix is singular: %s' % Mc.tolist())
    lam = dense_solve(Mc, np.ones(k), name='circulation system')
    x = np.dot(basis, lam)
    dens = [x[off[i]:off[i + 1]] for i in range(len(comps))]
    circ = np.array([2 * np.dot(c.speed() * c.h, d) for c, d in zip(comps[1:], dens[1:])])
    LOGGER.info('Vacuum solve: lambda = %s circulations = %s' % (lam.tolist(), circ.tolist()))
    return VacuumSolution(curve, walls, dens, float(x[-1]), lam, circ)


def _psi_normal(solution):
    """d_N Psi on Gamma from the vacuum (+N) side and the trace of Psi"""
    curve = solution.curve
    F = frame(curve)
    sigma = solution.densities[0]
    dn = sigma + np.dot(adjoint_double_layer(curve).matrix, sigma)
    psi = np.dot(single_layer(curve).matrix, sigma) + solution.const
    for c, d in solution.components()[1:]:
        v, g = evaluate_potential(c, d, curve.points, gradient=True)
        dn += (g * F.normal).sum(axis=1)
        psi += v
    return dn, psi, F


def trace_H(solution, curve=None):
    """H = h o X on Gamma; H = -d_N Psi T + d_tau Psi N"""
    if curve is not None and curve.curve_id != solution.curve.curve_id:
        raise ValidationError('curve: the vacuum solution belongs to another curve')
    dn, psi, F = _psi_normal(solution)
    dtau = spectral_derivative(psi) / F.speed
    return -dn[:, np.newaxis] * F.tangent + dtau[:, np.newaxis] * F.normal


def tangency_residual(solution):
    H = trace_H(solution)
    N = frame(solution.curve).normal
    return float(np.abs((H * N).sum(axis=1)).max())


def exterior_pressure_gradient(curve, solution, method='identity', delta=None, eps=(5e-4, 1e-3), H=None):
    """Gradient of p_+ = (|h|^2 - h_+|H|^2) / 2 on Gamma, h_+ the bounded
    harmonic extension above Gamma.

    'identity' uses 1/2 d_N |h|^2 = kappa |H|^2 on Gamma; 'field' takes a
    one-sided difference of p_+ along N. The tangential part vanishes since
    p_+ = 0 on Gamma. H, the trace on the nodes of `curve`, is computed
    from the solution when not given."""
    F = frame(curve)
    if solution.is_zero:
        return np.zeros((curve.n_nodes, 2))
    H = trace_H(solution, curve) if H is None else np.asarray(H)
    g = (H ** 2).sum(axis=1)
    if method == 'identity':
        Np = dtn_plus(curve, delta=delta).dot(g)
        dn = F.curvature * g - 0.5 * Np
    elif method == 'field':
        ext = harmonic_extension(curve, g, '+')
        p = []
        for e in eps:
            pts = curve.points + e * F.normal
            hh = solution.h(pts)
            p.append(0.5 * (hh ** 2).sum(axis=1) - 0.5 * ext(pts))
        e1, e2 = eps
        # p_+ = 0 on Gamma; quadratic through (0, 0), (e1, p1), (e2, p2)
        dn = (p[0] * e2 ** 2 - p[1] * e1 ** 2) / (e1 * e2 * (e2 - e1))
    else:
        raise ValidationError('method: must be identity or field (got %r)' % method)
    return dn[:, np.newaxis] * F.normal


def probe_circulations(solution, probe_factor=1.5, n_probe=256, depth=0.5):
    """Circulations of h measured on contours: a circle of radius
    probe_factor * a around W2 and the line W1 - depth"""
    res = []
    walls = solution.walls
    t = 2 * np.pi * np.arange(n_probe) / n_probe - np.pi
    if walls.w1 is not None:
        y = walls.w1.points[0, 1] - depth
        pts = np.vstack([t, np.full(n_probe, y)]).T
        res.append(float(solution.h(pts)[:, 0].sum() * 2 * np.pi / n_probe))
    if walls.w2 is not None:
        P = walls.w2.points
        c = P.mean(axis=0)
        r = probe_factor * np.hypot(*(P[0] - c))
        if distance_to_curve(solution.curve, c) <= r * (1 + TOLERANCES['probe_clearance']):
            raise ProbeGeometryError('W2 probe circle of radius %0.3e meets the interface' % r)
        pts = c + r * np.vstack([np.cos(t), np.sin(t)]).T
        tang = np.vstack([-np.sin(t), np.cos(t)]).T
        res.append(float((solution.h(pts) * tang).sum() * r * 2 * np.pi / n_probe))
    return np.array(res)


def cluster_map(n, a):
    """alpha(tau) = tau + (a/2) sin(2 tau) and its derivative on the uniform grid"""
    tau = 2 * np.pi * np.arange(n) / n - np.pi
    return tau + 0.5 * a * np.sin(2 * tau), 1 + a * np.cos(2 * tau)


def clustered_curve(curve, a):
    """Gamma sampled at alpha(tau); nodes crowd near the labels +-pi/2"""
    alpha, _ = cluster_map(curve.n_nodes, a)
    pts = curve.evaluate(alpha)
    return GridCurve(pts, shift=curve.shift, time=curve.time)


def _uncluster(H, n, a, max_iter=30):
    """Values at alpha(tau_j) back onto the uniform label grid"""
    theta = 2 * np.pi * np.arange(n) / n - np.pi
    tau = theta.copy()
    for _ in range(max_iter):
        f = tau + 0.5 * a * np.sin(2 * tau) - theta
        tau -= f / (1 + a * np.cos(2 * tau))
        if np.abs(f).max() < 1e-14:
            break
    aux = GridCurve(np.asarray(H, dtype=float), shift=(0.0, 0.0))
    return aux.evaluate(tau)


def solve_vacuum_clustered(curve, walls=None, a=0.0, delta=None):
    """Vacuum solve on the clustered quadrature; returns the solution on the
    clustered curve and H on the uniform grid of `curve`"""
    if a == 0:
        sol = solve_vacuum(curve, walls, delta=delta)
        return sol, trace_H(sol)
    cc = clustered_curve(curve, a)
    sol = solve_vacuum(cc, walls, delta=delta)
    return sol, _uncluster(trace_H(sol), curve.n_nodes, a)


def _cutoff(rho, radius=0.5):
    res = np.zeros_like(rho)
    inside = rho < radius
    r = rho[inside] / radius
    res[inside] = np.exp(1 - 1 / (1 - r ** 2))
    return res


def weight_mu(x, delta, p_S, radius=0.5):
    """mu_delta(x) = chi / (delta^2 + |x - p_S|^4)^(1/2) + 1 - chi"""
    x = np.atleast_2d(x)
    d = x - np.asarray(p_S, dtype=float)
    d[:, 0] = wrap_angle(d[:, 0])
    rho = np.hypot(d[:, 0], d[:, 1])
    chi = _cutoff(rho, radius)
    return chi / np.sqrt(delta ** 2 + rho ** 4) + 1 - chi


def weight_label(theta, delta):
    return 1.0 / (delta + np.cos(theta) ** 2)


def weighted_norms(field, s, m, delta, curve=None, p_S=None, space='curve'):
    """Discrete weighted Sobolev norm sum_{i <= s} ||w^m d^i f||^2, square
    rooted. 'curve': arclength derivatives with the spatial weight mu_delta
    on Gamma; 'label': theta derivatives with M_delta(theta)"""
    f = np.asarray(field, dtype=float)
    if f.ndim == 1:
        f = f[:, np.newaxis]
    n = f.shape[0]
    h = 2 * np.pi / n
    if space == 'curve':
        if curve is None:
            raise ValidationError('curve: required for the arclength norm')
        speed = curve.speed()
        if m:
            if p_S is None:
                r = pinch(curve)
                p_S = 0.5 * (curve.evaluate(r.theta_star) + curve.evaluate(r.vartheta_star) +
                             r.period_shift * curve.shift)
            w = weight_mu(curve.points, delta, p_S)
        else:
            w = np.ones(n)
        quad = speed * h
    elif space == 'label':
        speed = np.ones(n)
        w = weight_label(2 * np.pi * np.arange(n) / n - np.pi, delta) if m else np.ones(n)
        quad = np.full(n, h)
    else:
        raise ValidationError('space: must be curve or label (got %r)' % space)
    total = 0.0
    g = f
    for i in range(s + 1):
        if i:
            g = spectral_derivative(g) / speed[:, np.newaxis]
        total += float(np.dot(quad * w ** (2 * m), (g ** 2).sum(axis=1)))
    return np.sqrt(total)


def whitney_cover(delta, box=None, p_S=(0.0, 0.0), min_side=2.0 ** -20):
    """Dyadic squares (x0, y0, side) covering box = (xmin, xmax, ymin, ymax)
    refined while side > max(delta, dist(Q, p_S)^2), then balanced so
    neighbours differ by at most a factor 4"""
    p_S = np.asarray(p_S, dtype=float)
    if box is None:
        box = (p_S[0] - 1, p_S[0] + 1, p_S[1] - 1, p_S[1] + 1)
    xmin, xmax, ymin, ymax = box
    nx = int(np.ceil((xmax - xmin) - 1e-12))
    ny = int(np.ceil((ymax - ymin) - 1e-12))
    todo = [(xmin + i, ymin + j, 1.0) for i in range(nx) for j in range(ny)]
    floor_hit = False
    done = []
    while len(todo):
        x0, y0, l = todo.pop()
        dx = max(x0 - p_S[0], 0, p_S[0] - x0 - l)
        dy = max(y0 - p_S[1], 0, p_S[1] - y0 - l)
        target = max(delta, dx * dx + dy * dy)
        if l > target and l / 2 >= min_side:
            l2 = l / 2
            todo += [(x0, y0, l2), (x0 + l2, y0, l2), (x0, y0 + l2, l2), (x0 + l2, y0 + l2, l2)]
        else:
            floor_hit = floor_hit or l > target
            done.append((x0, y0, l))
    if floor_hit:
        LOGGER.warning('Whitney cover reached the minimum side %0.3e' % min_side)
    return _balance(done)


def _neighbours(sq, tol=1e-12):
    x, y, l = sq[:, 0], sq[:, 1], sq[:, 2]
    ox = (np.maximum(x[:, None], x[None, :]) <= np.minimum(x + l, (x + l)[:, None]) + tol)
    oy = (np.maximum(y[:, None], y[None, :]) <= np.minimum(y + l, (y + l)[:, None]) + tol)
    adj = ox & oy
    np.fill_diagonal(adj, False)
    return adj


def _balance(squares):
    sq = np.array(squares, dtype=float)
    while True:
        adj = _neighbours(sq)
        l = sq[:, 2]
        smallest = np.where(adj, l[None, :], np.inf).min(axis=1)
        split = l > 4 * smallest
        if not np.any(split):
            break
        keep = sq[~split]
        new = []
        for x0, y0, s in sq[split]:
            s2 = s / 2
            new += [(x0, y0, s2), (x0 + s2, y0, s2), (x0, y0 + s2, s2), (x0 + s2, y0 + s2, s2)]
        sq = np.vstack([keep, np.array(new)])
    return [tuple(r) for r in sq]


def square_ratio(squares, delta, p_S):
    """max(delta, dist(Q, p_S)^2) / side for each square"""
    p_S = np.asarray(p_S, dtype=float)
    sq = np.array(squares, dtype=float)
    x, y, l = sq[:, 0], sq[:, 1], sq[:, 2]
    dx = np.maximum(np.maximum(x - p_S[0], 0), p_S[0] - x - l)
    dy = np.maximum(np.maximum(y - p_S[1], 0), p_S[1] - y - l)
    return np.maximum(delta, dx ** 2 + dy ** 2) / l


def gap_samples(curve, report, reach=0.3, n=61, across=5):
    """Patch about the gap midpoint: n points along the pinch tangent
    (within `reach`) times `across` offsets along the normal, up to 0.2
    delta on either side"""
    a = curve.evaluate(report.theta_star)
    b = curve.evaluate(report.vartheta_star) + report.period_shift * curve.shift
    mid = 0.5 * (a + b)
    xp = curve.evaluate(report.theta_star, 1)
    T = xp / np.sqrt(np.dot(xp, xp))
    N = np.array([-T[1], T[0]])
    t = np.linspace(-reach, reach, n)
    s = np.linspace(-0.2, 0.2, across) * report.delta
    pts = mid + t[:, np.newaxis, np.newaxis] * T + s[np.newaxis, :, np.newaxis] * N
    return mid, pts.reshape((-1, 2))


def _squeeze_entry(curve, solution, guess=None):
    r = pinch(curve, guess=guess)
    mid, pts = gap_samples(curve, r)
    keep = np.array([distance_to_curve(curve, p) >= 0.25 * r.delta for p in pts])
    pts = pts[keep]
    hmid = np.sqrt((solution.h(mid) ** 2).sum())
    habs = np.sqrt((solution.h(pts) ** 2).sum(axis=1))
    mu = weight_mu(pts, r.delta, mid)
    cover = whitney_cover(r.delta, p_S=mid, box=(mid[0] - 0.5, mid[0] + 0.5, mid[1] - 0.5, mid[1] + 0.5))
    return SqueezeReport(r.delta, float(hmid), float((mu * habs).max()), float((mu ** 2 * habs).max()),
                         len(cover), solution.lambda1, solution.lambda2, solution.circulation1,
                         solution.circulation2)


def squeeze_report(family, guess=None):
    """Squeezing diagnostics along a pinch family of (curve, solution) pairs"""
    if len(family) < 3:
        raise FamilyTooShortError('A squeeze family needs at least 3 members (got %s)' % len(family))
    res = [_squeeze_entry(c, s, guess=guess) for c, s in family]
    return sorted(res, key=lambda r: -r.delta)


def superlinear_decay(reports):
    """Gap field falls faster than the pinch between consecutive members"""
    reps = sorted(reports, key=lambda r: -r.delta)
    for a, b in zip(reps[:-1], reps[1:]):
        if not b.gap_mid_h < (b.delta / a.delta) * a.gap_mid_h:
            return False
    return True


def write_squeeze_csv(fname, reports):
    with open(fname, 'w') as fpt:
        w = csv.writer(fpt)
        w.writerow(SQUEEZE_COLUMNS)
        for r in reports:
            w.writerow([repr(float(getattr(r, k))) for k in SQUEEZE_COLUMNS])


def analyticity_defect(solution, center, radius, m_max=8, n_probe=64, clearance=None):
    """|c_j|, j <= m_max, of Psi = Re sum c_j (z - center)^j from the Fourier
    coefficients of Psi on a probe circle"""
    clearance = TOLERANCES['probe_clearance'] if clearance is None else clearance
    center = np.asarray(center, dtype=float)
    for c, _ in solution.components():
        d = distance_to_curve(c, center)
        if d <= radius * (1 + clearance):
            raise ProbeGeometryError('Probe circle of radius %0.3e exits the vacuum (boundary at %0.3e)' %
                                     (radius, d))
    t = 2 * np.pi * np.arange(n_probe) / n_probe
    pts = center + radius * np.vstack([np.cos(t), np.sin(t)]).T
    a = np.fft.fft(solution.stream(pts)) / n_probe
    j = np.arange(m_max + 1)
    coef = np.abs(a[j]) / radius ** j
    coef[1:] *= 2
    return coef
