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
import copy
from contextlib import contextmanager
import json
import os
import gzip


class ValidationError(ValueError):
    """Invalid configuration or input; the message names the offending field"""
    pass


class SplashError(RuntimeError):
    """Base class of the numerical failures"""
    pass


class DegenerateCurveError(SplashError):
    pass


class ResolutionError(SplashError):
    pass


class SingularPointError(SplashError):
    pass


class IllConditionedError(SplashError):
    pass


class ConvergenceError(SplashError):
    pass


class NoBracketError(SplashError):
    pass


class BranchCutError(SplashError):
    pass


class ProbeGeometryError(SplashError):
    pass


class FamilyTooShortError(SplashError):
    pass


class ShapeConstraintError(SplashError):
    pass


class StaleCacheError(SplashError):
    pass


class CFLError(SplashError):
    pass


class CirculationSingularError(SplashError):
    pass


class SolverError(SplashError):
    pass


def dense_solve(A, b, name='linear system'):
    """numpy.linalg.solve; a singular matrix or a non-finite solution is a
    SolverError"""
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise SolverError('%s: %s' % (name, e))
    if not np.all(np.isfinite(x)):
        raise SolverError('%s: non-finite solution' % name)
    return x


def line_iterator(filename):
    if filename.endswith(".gz"):
        f = gzip.GzipFile(filename)
    else:
        f = open(filename, encoding='utf8')
    while True:
        line = f.readline()
        if type(line) is bytes:
            line = str(line, encoding='utf8')
        if len(line) == 0:
            break
        line = line.strip()
        if len(line) == 0:
            continue
        yield line
    f.close()


def json_iterator(filename):
    for line in line_iterator(filename):
        yield json.loads(line)


def read_json(filename):
    """Reads a whole JSON document, gzip compressed when the name ends in .gz"""
    return json.loads("\n".join(line_iterator(filename)))


def write_json(filename, data, indent=None):
    res = json.dumps(data, sort_keys=True, indent=indent)
    if filename.endswith('.gz'):
        with gzip.open(filename, 'wb') as fpt:
            fpt.write(bytes(res, encoding='utf-8'))
    else:
        with open(filename, 'w') as fpt:
            fpt.write(res)


params_fname = os.path.join(os.path.dirname(__file__), 'conf', 'default_parameters.json')
with open(params_fname, 'r') as fpt:
    PARAMS = json.loads(fpt.read())

tolerances_fname = os.path.join(os.path.dirname(__file__), 'conf', 'tolerances.json')
with open(tolerances_fname, 'r') as fpt:
    TOLERANCES = json.loads(fpt.read())


@contextmanager
def tolerance_scope(tolerances):
    """TOLERANCES overridden by tolerances inside the block, restored on exit"""
    saved = dict(TOLERANCES)
    TOLERANCES.update(tolerances)
    try:
        yield TOLERANCES
    finally:
        TOLERANCES.clear()
        TOLERANCES.update(saved)


def wrap_angle(x):
    """Maps angles into [-pi, pi)"""
    return np.mod(np.asarray(x) + np.pi, 2 * np.pi) - np.pi


def wavenumbers(n):
    return np.fft.fftfreq(n, 1.0 / n)


def perispecint(f):
    """Mean-zero periodic antiderivative, along axis 0, of f minus its mean"""
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    k = wavenumbers(n)
    inv = np.zeros(n, dtype=complex)
    nz = k != 0
    inv[nz] = 1.0 / (1j * k[nz])
    if n % 2 == 0:
        inv[n // 2] = 0
    inv = inv.reshape((n,) + (1,) * (f.ndim - 1))
    return np.real(np.fft.ifft(np.fft.fft(f, axis=0) * inv, axis=0))


def cheb(n):
    """Chebyshev-Lobatto points x_j = cos(pi j / n) and differentiation matrix"""
    if n == 0:
        return np.ones(1), np.zeros((1, 1))
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    c = np.hstack((2, np.ones(n - 1), 2)) * (-1.0) ** j
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D = D - np.diag(D.sum(axis=1))
    return x, D


def clenshaw_curtis(n):
    """Quadrature weights on cheb(n) points for the interval [-1, 1]"""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    ii = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n ** 2 - 1)
        for k in range(1, n // 2):
            v -= 2 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
        v -= np.cos(n * theta[ii]) / (n ** 2 - 1)
    else:
        w[0] = w[n] = 1.0 / n ** 2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2 * np.cos(2 * k * theta[ii]) / (4 * k * k - 1)
    w[ii] = 2 * v / n
    return w


class ScenarioConfig(object):
    """Scenario parameters: defaults from conf/default_parameters.json,
    tolerances from conf/tolerances.json, both overridable"""
    SCENARIOS = ['closing', 'opening', 'reversal', 'operators_only',
                 'vacuum_family']

    def __init__(self, **kwargs):
        params = copy.deepcopy(PARAMS)
        for k in kwargs:
            if k not in params:
                raise ValidationError('%s: unknown parameter' % k)
        params.update(kwargs)
        tol = dict(TOLERANCES)
        for k, v in (params.get('tolerances') or {}).items():
            if k not in tol:
                raise ValidationError('tolerances.%s: unknown tolerance' % k)
            tol[k] = v
        params['tolerances'] = tol
        self._params = params
        self.validate()

    @classmethod
    def from_file(cls, fname, **overrides):
        try:
            data = read_json(fname)
        except (IOError, OSError) as e:
            raise ValidationError('config: cannot read %s (%s)' % (fname, e))
        except ValueError as e:
            raise ValidationError('config: invalid JSON in %s (%s)' % (fname, e))
        if not isinstance(data, dict):
            raise ValidationError('config: expected a JSON object')
        data.update(overrides)
        return cls(**data)

    def __getattr__(self, name):
        params = self.__dict__.get('_params')
        if params is None or name not in params:
            raise AttributeError(name)
        return params[name]

    def to_dict(self):
        return copy.deepcopy(self._params)

    @staticmethod
    def _even(name, v, minimum):
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum or v % 2:
            raise ValidationError('%s: must be an even integer >= %s (got %r)' % (name, minimum, v))

    @staticmethod
    def _positive(name, v, allow_zero=False):
        try:
            ok = float(v) >= 0 if allow_zero else float(v) > 0
        except (TypeError, ValueError):
            ok = False
        if not ok:
            kind = 'non-negative' if allow_zero else 'positive'
            raise ValidationError('%s: must be %s (got %r)' % (name, kind, v))

    def validate(self):
        p = self._params
        if p['schema'] != PARAMS['schema']:
            raise ValidationError('schema: unsupported version %r' % p['schema'])
        if p['scenario'] not in self.SCENARIOS:
            raise ValidationError('scenario: must be one of %s (got %r)' % (", ".join(self.SCENARIOS),
                                                                          p['scenario']))
        self._even('n_surface', p['n_surface'], 8)
        self._even('n_sigma_theta', p['n_sigma_theta'], 8)
        if not isinstance(p['n_sigma_psi'], int) or p['n_sigma_psi'] < 16:
            raise ValidationError('n_sigma_psi: must be an integer >= 16 (got %r)' % p['n_sigma_psi'])
        self._positive('delta_init', p['delta_init'], allow_zero=p['scenario'] != 'closing')
        if p['nu_bar'] is not None:
            self._positive('nu_bar', p['nu_bar'])
        self._positive('dt', p['dt'])
        self._positive('t_end', p['t_end'], allow_zero=True)
        for k in ['snapshot_cadence', 'check_cadence', 'filter_order']:
            if not isinstance(p[k], int) or p[k] < 0:
                raise ValidationError('%s: must be a non-negative integer (got %r)' % (k, p[k]))
        fam = p['delta_family']
        if not isinstance(fam, list) or not all([isinstance(x, (int, float)) and x > 0 for x in fam]):
            raise ValidationError('delta_family: must be a list of positive numbers')
        if p['scenario'] == 'vacuum_family' and len(fam) < 3:
            raise ValidationError('delta_family: needs at least 3 entries (got %s)' % len(fam))
        self._positive('r0', p['r0'])
        if not 0 <= p['cluster'] < 1:
            raise ValidationError('cluster: must lie in [0, 1) (got %r)' % p['cluster'])
        if p['wall_radius'] is not None:
            self._positive('wall_radius', p['wall_radius'])
        if p['wall_height'] is not None and not isinstance(p['wall_height'], (int, float)):
            raise ValidationError('wall_height: must be a number or null (got %r)' % p['wall_height'])
        if len(p['wall_nodes']) != 2:
            raise ValidationError('wall_nodes: expected two node counts')
        for i, v in enumerate(p['wall_nodes']):
            self._even('wall_nodes[%s]' % i, v, 8)
        if not isinstance(p['cpu_cores'], int) or p['cpu_cores'] < 1:
            raise ValidationError('cpu_cores: must be a positive integer (got %r)' % p['cpu_cores'])


def fourier_diff_matrix(n):
    """Spectral differentiation matrix of the uniform n-point periodic grid (n even)"""
    h = 2 * np.pi / n
    d = np.arange(n)[:, np.newaxis] - np.arange(n)[np.newaxis, :]
    off = d != 0
    res = np.zeros((n, n))
    res[off] = 0.5 * (-1.0) ** d[off] / np.tan(d[off] * h / 2)
    return res
