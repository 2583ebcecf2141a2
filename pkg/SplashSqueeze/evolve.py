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
from .curve import GridCurve, flat_line, frame, pinch, resample, splash_root
from .fieldop import OperatorCache, build_E, n_res, stack
from .vacuum import WallSet, VacuumSolution, solve_vacuum_clustered, exterior_pressure_gradient
from .vacuum import analyticity_defect as probe_coefficients
from .plasma import SigmaGrid, SigmaOperator, divcurl_solve, interior_pressure_gradient
from .plasma import pressure_decomposition_check, field_line_stream
from .utils import TOLERANCES, ValidationError, SplashError, CFLError, ProbeGeometryError, IllConditionedError
from .utils import wavenumbers
try:
    from tqdm import tqdm
except ImportError:
    def tqdm(x, **kwargs):
        return x


LOGGER = logging.getLogger('SplashSqueeze')

StepDiagnostics = namedtuple('StepDiagnostics', ['t', 'pinch', 'jacobian_defect', 'good_unknown_residual',
                                                 'pressure_residual', 'plasma_energy', 'vacuum_energy',
                                                 'flux', 'gap_field', 'filtered_energy'])

Derivatives = namedtuple('Derivatives', ['X', 'U', 'Xmap', 'omega', 'J'])

RHSInfo = namedtuple('RHSInfo', ['pinch', 'bulk', 'vacuum', 'H', 'operator', 'good_unknown_residual',
                                 'route', 'wave_speed'])


class EvolutionContext(object):
    """Quantities fixed for a run: Sigma grid, field-line profile, floor
    circulations, walls and the operator routes"""

    def __init__(self, grid, sigma, alpha_bar, beta_bar, walls=None, z_star=(0.0, 1.0), cluster=0.0,
                 filter_order=0):
        self._grid = grid
        self._sigma = np.asarray(sigma, dtype=float)
        self._alpha_bar = float(alpha_bar)
        self._beta_bar = float(beta_bar)
        self._walls = WallSet() if walls is None else walls
        self._z_star = np.asarray(z_star, dtype=float)
        self._cluster = cluster
        self._filter_order = filter_order

    @property
    def grid(self):
        return self._grid

    @property
    def sigma(self):
        return self._sigma

    @property
    def alpha_bar(self):
        return self._alpha_bar

    @property
    def beta_bar(self):
        return self._beta_bar

    @property
    def walls(self):
        return self._walls

    @property
    def z_star(self):
        return self._z_star

    @property
    def cluster(self):
        return self._cluster

    @property
    def filter_order(self):
        return self._filter_order

    def reversed(self):
        return EvolutionContext(self._grid, self._sigma, -self._alpha_bar, self._beta_bar, self._walls,
                                self._z_star, self._cluster, self._filter_order)


class PlasmaVacuumState(object):
    """(X, U) on the interface nodes and (Xmap, omega, J) on Sigma at time t.
    B = X_theta is never stored. Operators are cached per curve"""

    def __init__(self, t, curve, U, Xmap, omega, J, context, cache=None):
        self._t = float(t)
        if curve.time != self._t:
            curve = GridCurve(curve.points, shift=curve.shift, band_limit=curve.band_limit, time=self._t)
        self._curve = curve
        self._U = np.asarray(U, dtype=float)
        if self._U.shape != curve.points.shape:
            raise ValidationError('U: expected shape %s (got %s)' % (curve.points.shape, self._U.shape))
        self._Xmap = np.asarray(Xmap, dtype=float)
        self._omega = np.asarray(omega, dtype=float)
        self._J = np.asarray(J, dtype=float)
        self._context = context
        self._cache = OperatorCache() if cache is None else cache

    @classmethod
    def from_initial_data(cls, data, walls=None, z_star=(0.0, 1.0), cluster=0.0, filter_order=0):
        bulk = data.bulk
        ctx = EvolutionContext(bulk.grid, bulk.sigma, data.alpha_bar, data.beta_bar, walls=walls, z_star=z_star,
                               cluster=cluster, filter_order=filter_order)
        return cls(0.0, data.curve, data.U, bulk.Xmap, bulk.omega, bulk.J, ctx)

    @property
    def t(self):
        return self._t

    @property
    def curve(self):
        return self._curve

    @property
    def X(self):
        return self._curve.points

    @property
    def U(self):
        return self._U

    @property
    def B(self):
        return self._curve.derivative(1)

    @property
    def Xmap(self):
        return self._Xmap

    @property
    def omega(self):
        return self._omega

    @property
    def J(self):
        return self._J

    @property
    def context(self):
        return self._context

    def cached(self, kind, builder):
        return self._cache.get(self._curve, kind, builder)

    def replace(self, **kwargs):
        fields = dict(t=self._t, curve=self._curve, U=self._U, Xmap=self._Xmap, omega=self._omega, J=self._J,
                      context=self._context)
        fields.update(kwargs)
        return PlasmaVacuumState(**fields)

    def advance(self, derivs, dt):
        curve = self._curve.with_points(self._curve.points + dt * derivs.X, time=self._t + dt)
        return PlasmaVacuumState(self._t + dt, curve, self._U + dt * derivs.U, self._Xmap + dt * derivs.Xmap,
                                 self._omega + dt * derivs.omega, self._J + dt * derivs.J, self._context)


def static_equilibrium(n_surface=64, n_theta=32, n_psi=16, height=1.0):
    """Flat interface at x2 = height over straight field lines, no flow and
    no walls"""
    grid = SigmaGrid(n_theta, n_psi)
    T, P = grid.mesh()
    Xmap = np.stack([T, height * (1 + P)], axis=-1)
    sigma = np.full(n_psi, height)
    op = SigmaOperator(grid, Xmap)
    J = op.apply(field_line_stream(grid, sigma)) / sigma[np.newaxis, :]
    ctx = EvolutionContext(grid, sigma, 0.0, 2 * np.pi * height, walls=WallSet())
    n = n_surface
    return PlasmaVacuumState(0.0, flat_line(n, height), np.zeros((n, 2)), Xmap, np.zeros(grid.shape), J, ctx)


def _vacuum(state, delta):
    ctx = state.context
    curve = state.curve
    if len(ctx.walls.walls) == 0:
        return VacuumSolution.zero(curve, ctx.walls), np.zeros((curve.n_nodes, 2))
    if delta < TOLERANCES['dtn_plus_floor']:
        raise IllConditionedError('Pinch %0.3e below the vacuum conditioning floor %0.1e' %
                                  (delta, TOLERANCES['dtn_plus_floor']))
    return state.cached('Vacuum', lambda c: solve_vacuum_clustered(c, ctx.walls, a=ctx.cluster, delta=delta))


def assemble_rhs(state):
    """Time derivatives of (X, U, Xmap, omega, J).

    U_t = E^-1 (D E B_theta + F), F = -E P_- - (0, N.P_+ + n_res|H|^2 / 2),
    D = diag(1, 1 + |H|^2/|B|^2); omega_t = J_theta; J_t = omega_theta +
    2 sigma^-1 (U_theta . B_psi - U_psi . B_theta); Xmap_t is the bulk
    velocity with the interface row taken from U"""
    ctx = state.context
    grid = ctx.grid
    curve = state.curve
    n = curve.n_nodes
    r = pinch(curve)
    sol, H = _vacuum(state, r.delta)
    g = (H ** 2).sum(axis=1)
    op = SigmaOperator(grid, state.Xmap)
    bulk = divcurl_solve(grid, state.Xmap, state.omega, state.J, curve, state.U, ctx.sigma, ctx.alpha_bar,
                         ctx.beta_bar, op=op)
    Pm = resample(interior_pressure_gradient(op, bulk.U, bulk.B, curve, H).trace, n)
    F = frame(curve)
    route = 'sqrt' if r.delta < TOLERANCES['sqrt_switchover'] else 'dtn'
    E = state.cached('E' + route, lambda c: build_E(c, route=route, z_star=ctx.z_star))
    forcing = -E.apply(Pm)
    if np.any(g):
        Pp = exterior_pressure_gradient(curve, sol, delta=r.delta, H=H)
        nres = state.cached('NRes', lambda c: n_res(c))
        forcing[:, 1] -= (F.normal * Pp).sum(axis=1) + 0.5 * nres.dot(g)
    Bt = curve.derivative(2)
    D2 = 1 + g / F.speed ** 2
    EB = E.apply(Bt)
    EB[:, 1] *= D2
    W = EB + forcing
    U_t = E.inverse(W)
    good = float(np.abs(stack(E.apply(U_t) - W)).max())
    if good > TOLERANCES['wiring']:
        LOGGER.warning('Good-unknown residual %0.3e' % good)
    Xmap_t = bulk.U.copy()
    Xmap_t[:, 0, :] = resample(state.U, grid.n_theta)
    Ut, Up = grid.d_theta(bulk.U), grid.d_psi(bulk.U)
    Bt_bulk, Bp = grid.d_theta(bulk.B), grid.d_psi(bulk.B)
    omega_t = grid.d_theta(state.J)
    J_t = grid.d_theta(state.omega) + 2 / ctx.sigma[np.newaxis, :] * ((Ut * Bp).sum(axis=-1) -
                                                                        (Up * Bt_bulk).sum(axis=-1))
    info = RHSInfo(r, bulk, sol, H, op, good, route, float(D2.max()))
    return Derivatives(state.U.copy(), U_t, Xmap_t, omega_t, J_t), info


def cfl_limit(state, wave_speed, cfl=None):
    cfl = TOLERANCES['cfl'] if cfl is None else cfl
    s = state.curve.speed().min()
    return cfl * min(1.0, s) / max(1.0, wave_speed) * state.curve.h


def spectral_filter(f, order):
    """exp(-36 (|k| / k_max)^order) along axis 0; returns (filtered, removed energy)"""
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    k = np.abs(wavenumbers(n)) / (n // 2)
    mult = np.exp(-36 * k ** order).reshape((n, ) + (1, ) * (f.ndim - 1))
    out = np.real(np.fft.ifft(np.fft.fft(f, axis=0) * mult, axis=0))
    return out, float(0.5 * ((f - out) ** 2).sum() * 2 * np.pi / n)


def _filtered(state):
    order = state.context.filter_order
    if not order:
        return state, 0.0
    curve = state.curve
    pts, e1 = spectral_filter(curve.periodic_part(), order)
    pts = pts + curve.points - curve.periodic_part()
    U, e2 = spectral_filter(state.U, order)
    omega, _ = spectral_filter(state.omega, order)
    J, _ = spectral_filter(state.J, order)
    res = PlasmaVacuumState(state.t, curve.with_points(pts), U, state.Xmap, omega, J, state.context)
    LOGGER.debug('Filtered energy %0.3e' % (e1 + e2))
    return res, e1 + e2


def step(state, dt, k1=None):
    """Classical RK4 step; B is rebuilt from X at every stage"""
    if k1 is None:
        k1, info = assemble_rhs(state)
    else:
        k1, info = k1
    limit = cfl_limit(state, info.wave_speed)
    if dt > limit:
        raise CFLError('dt = %0.3e above the CFL bound %0.3e' % (dt, limit))
    k2, _ = assemble_rhs(state.advance(k1, 0.5 * dt))
    k3, _ = assemble_rhs(state.advance(k2, 0.5 * dt))
    k4, _ = assemble_rhs(state.advance(k3, dt))
    comb = Derivatives(*[(a + 2 * b + 2 * c + d) / 6.0 for a, b, c, d in zip(k1, k2, k3, k4)])
    return _filtered(state.advance(comb, dt))


def reverse(state):
    """Time reversal: U and omega change sign, X, Xmap and J are kept"""
    return PlasmaVacuumState(state.t, state.curve, -state.U, state.Xmap, -state.omega, state.J,
                             state.context.reversed())


def plasma_energy(state, bulk):
    grid = state.context.grid
    dens = ((bulk.U ** 2).sum(axis=-1) + (bulk.B ** 2).sum(axis=-1)) * state.context.sigma[np.newaxis, :]
    return 0.5 * float(grid.integrate(dens))


def _gap_field(curve, solution, report):
    if solution.is_zero:
        return 0.0
    mid = 0.5 * (curve.evaluate(report.theta_star) + curve.evaluate(report.vartheta_star) +
                 report.period_shift * curve.shift)
    return float(np.sqrt((solution.h(mid) ** 2).sum()))


def diagnostics(state, info, pressure_check=False, filtered_energy=0.0):
    pr = float('nan')
    if pressure_check:
        pr = pressure_decomposition_check(info.operator, info.bulk.U, info.bulk.B, state.curve, info.vacuum,
                                          delta=info.pinch.delta, H=info.H)
    return StepDiagnostics(state.t, info.pinch.delta, info.bulk.jacobian_defect(), info.good_unknown_residual,
                           pr, plasma_energy(state, info.bulk), info.vacuum.energy(), info.bulk.flux,
                           _gap_field(state.curve, info.vacuum, info.pinch), filtered_energy)


class Trajectory(object):
    """States visited by run: (curve, U) samples, diagnostics, the stop
    reason and, after a detected splash, its parameters"""

    def __init__(self):
        self._samples = []
        self._diagnostics = []
        self._stop_reason = None
        self._error = None
        self._splash = None
        self._final = None

    @property
    def samples(self):
        return self._samples

    @property
    def diagnostics(self):
        return self._diagnostics

    @property
    def stop_reason(self):
        return self._stop_reason

    @property
    def error(self):
        return self._error

    @property
    def splash(self):
        return self._splash

    @property
    def final(self):
        return self._final

    def record(self, state, diag):
        self._samples.append((state.curve, state.U))
        self._diagnostics.append(diag)
        self._final = state

    def stop(self, reason, error=None):
        self._stop_reason = reason
        self._error = error

    def set_splash(self, params):
        self._splash = params

    def envelope(self):
        """Pinch speed nu = -d delta/dt(0) from the first step and the
        smallest C with |delta - delta_0 + nu t| <= C t^2"""
        if len(self._diagnostics) < 2:
            return dict(nu=float('nan'), C=float('nan'))
        t = np.array([d.t for d in self._diagnostics])
        delta = np.array([d.pinch for d in self._diagnostics])
        t = t - t[0]
        nu = -(delta[1] - delta[0]) / t[1]
        C = float((np.abs(delta[1:] - delta[0] + nu * t[1:]) / t[1:] ** 2).max())
        return dict(nu=float(nu), C=C)

    def to_json(self):
        res = dict(stop_reason=self._stop_reason, error=self._error, steps=len(self._diagnostics),
                   envelope=self.envelope())
        if self._splash is not None:
            res['splash'] = dict(t_S=self._splash.t_S, theta_S=self._splash.theta_S,
                                 vartheta_S=self._splash.vartheta_S, p_S=list(self._splash.p_S))
        return res


def _splash_detected(curve, report, spacings=None):
    spacings = TOLERANCES['stop_spacings'] if spacings is None else spacings
    gap = abs(report.theta_star - report.vartheta_star - 2 * np.pi * report.period_shift)
    if gap < 1.5 * TOLERANCES['pinch_separation']:
        # nearest pair sits on the separation constraint: no pinch
        return False
    xp = curve.evaluate(report.theta_star, 1)
    return report.delta < spacings * np.sqrt(np.dot(xp, xp)) * curve.h


def run(state, dt, t_end, snapshot_cadence=0, check_cadence=0, callback=None, progress=False):
    """Advances until t_end, a detected splash or a numerical failure; the
    reason is kept in the returned Trajectory"""
    traj = Trajectory()
    nsteps = int(np.ceil((t_end - state.t) / dt - 1e-9))
    filtered = 0.0
    steps = tqdm(range(nsteps + 1), total=nsteps + 1) if progress else range(nsteps + 1)
    for i in steps:
        try:
            k1 = assemble_rhs(state)
        except SplashError as e:
            traj.stop(type(e).__name__, str(e))
            LOGGER.warning('Run stopped at t=%0.6e: %s' % (state.t, e))
            break
        check = check_cadence > 0 and i % check_cadence == 0
        try:
            diag = diagnostics(state, k1[1], pressure_check=check, filtered_energy=filtered)
        except SplashError as e:
            traj.stop(type(e).__name__, str(e))
            break
        traj.record(state, diag)
        LOGGER.debug('t=%0.6e pinch=%0.6e' % (state.t, diag.pinch))
        if callback is not None and snapshot_cadence > 0 and i % snapshot_cadence == 0:
            callback(state, k1[1])
        if _splash_detected(state.curve, k1[1].pinch):
            traj.stop('splash')
            break
        if i == nsteps:
            traj.stop('t_end')
            break
        h = min(dt, t_end - state.t)
        try:
            state, filtered = step(state, h, k1=k1)
        except SplashError as e:
            traj.stop(type(e).__name__, str(e))
            LOGGER.warning('Run stopped at t=%0.6e: %s' % (state.t, e))
            break
    if traj.stop_reason == 'splash' or (traj.stop_reason not in [None, 't_end'] and len(traj.samples) > 1):
        try:
            traj.set_splash(splash_root(traj.samples))
        except (SplashError, ValueError) as e:
            LOGGER.info('No splash parameters: %s' % e)
    return traj


def state_analyticity_defect(state, radius=None, m_max=8, n_probe=64):
    """|c_j| of the vacuum stream function about the gap midpoint"""
    r = pinch(state.curve)
    sol, _ = _vacuum(state, r.delta)
    curve = sol.curve
    mid = 0.5 * (curve.evaluate(r.theta_star) + curve.evaluate(r.vartheta_star) + r.period_shift * curve.shift)
    radius = 0.4 * r.delta if radius is None else radius
    if radius <= 0:
        raise ProbeGeometryError('Probe radius must be positive (pinch %0.3e)' % r.delta)
    return probe_coefficients(sol, mid, radius, m_max=m_max, n_probe=n_probe)


def advance(state, dt, duration):
    nsteps = int(round(duration / dt))
    for _ in range(nsteps):
        state, _ = step(state, dt)
    return state


def return_error(state, dt, duration):
    """Forward duration/2, reverse, forward duration/2: max distance between
    the final and the initial interface"""
    half = 0.5 * duration
    mid = advance(state, dt, half)
    final = advance(reverse(mid), dt, half)
    return float(np.abs(final.X - state.X).max())


DIAGNOSTIC_COLUMNS = list(StepDiagnostics._fields)


def write_diagnostics_csv(fname, diags):
    with open(fname, 'w') as fpt:
        w = csv.writer(fpt)
        w.writerow(DIAGNOSTIC_COLUMNS)
        for d in diags:
            w.writerow([repr(float(v)) for v in d])
