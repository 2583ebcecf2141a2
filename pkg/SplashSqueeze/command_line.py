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
import argparse
import numpy as np
import os
import sys
import time
import logging
import filecmp
import tempfile
import shutil
from multiprocessing import Pool
import SplashSqueeze
from .utils import PARAMS, TOLERANCES, ScenarioConfig, ValidationError, SplashError, SolverError
from .utils import tolerance_scope
from .utils import write_json
from .curve import GridCurve, flat_line, circle, ellipse, pinch
from .potential import single_layer, double_layer_T, measure_jump
from .fieldop import SingleLayerSolver, dtn_minus, n_res, hilbert_transform
from .vacuum import WallSet, solve_vacuum, squeeze_report, superlinear_decay, write_squeeze_csv
from .vacuum import analyticity_defect, gap_samples
from .plasma import trough_curve, build_initial_data
from .evolve import PlasmaVacuumState, run, return_error, write_diagnostics_csv, assemble_rhs, cfl_limit
try:
    from tqdm import tqdm
except ImportError:
    def tqdm(x, **kwargs):
        return x


LOGGER = logging.getLogger('SplashSqueeze')

# scenario -> (initial data kind, direction)
SCENARIO_DATA = dict(closing=('near_splash', 'closing'),
                     opening=('splash', 'opening'),
                     reversal=('near_splash', 'opening'))


def family_member(args):
    """Vacuum solve on the trough interface of pinch delta; failures are
    returned, not raised, so the family keeps going"""
    delta, n_surface, walls, tolerances = args
    try:
        with tolerance_scope(tolerances):
            curve = trough_curve(n_surface, delta)
            walls.check(curve)
            r = pinch(curve)
            return delta, curve, solve_vacuum(curve, walls, delta=r.delta), None
    except (SplashError, ValidationError) as e:
        LOGGER.warning('Family member delta=%s failed: %s' % (delta, e))
        return delta, None, None, dict(type=type(e).__name__, message=str(e))


def jump_estimate(curve, eps=(1e-2, 1e-3, 1e-4)):
    """Double layer jump at the middle node extrapolated to zero distance"""
    f = np.cos(curve.theta)
    node = curve.n_nodes // 2
    est = []
    for e in eps:
        below, above = measure_jump(curve, f, node, e)
        est.append((below - above) / (2 * f[node]))
    return float(np.polyfit(eps, est, 1)[1])


def growth_exponent(M, curve, ks):
    norms = [np.abs(M.dot(np.cos(k * curve.theta))).max() for k in ks]
    return float(np.polyfit(np.log(ks), np.log(norms), 1)[0])


class CommandLine(object):
    scenario = None
    description = "SplashSqueeze"

    def version(self):
        pa = self.parser.add_argument
        pa('--version',
           action='version', version='SplashSqueeze %s' % SplashSqueeze.__version__)
        pa('--verbose', dest='verbose', default=logging.NOTSET, type=int)

    def cores(self):
        self.parser.add_argument('-u', '--cpu-cores',
                                 help='Number of cores',
                                 dest='cpu_cores',
                                 default=None,
                                 type=int)

    def config(self):
        self.parser.add_argument('--config', dest='config', default=None, type=str,
                                 help='Scenario configuration (JSON)')

    def out(self):
        self.parser.add_argument('--out', dest='out', default=None, type=str,
                                 help='Output directory')

    def seedless(self):
        self.parser.add_argument('--seedless', dest='seedless', default=False, action='store_true',
                                 help='Run twice and require byte-identical outputs')

    def common(self):
        self.parser = argparse.ArgumentParser(description=self.description)
        self.config()
        self.out()
        self.seedless()
        self.cores()
        self.version()

    def parse_args(self):
        self.data = self.parser.parse_args()
        if hasattr(self.data, 'verbose'):
            logging.basicConfig()
            logger = logging.getLogger('SplashSqueeze')
            logger.setLevel(self.data.verbose)
            logger.info('Logging to: %s', self.data.verbose)
        self.main()

    def read_config(self):
        overrides = dict()
        if self.scenario is not None:
            overrides['scenario'] = self.scenario
        if getattr(self.data, 'cpu_cores', None) is not None:
            overrides['cpu_cores'] = self.data.cpu_cores
        if self.data.config is None:
            cfg = ScenarioConfig(**overrides)
        else:
            cfg = ScenarioConfig.from_file(self.data.config, **overrides)
        return cfg

    @property
    def output_dir(self):
        if self.data.out is not None:
            return self.data.out
        if getattr(self, 'cfg', None) is not None:
            return self.cfg.output_dir
        return PARAMS['output_dir']

    def path(self, *args):
        return os.path.join(self.output_dir, *args)

    def deterministic(self, fname, producer):
        """Writes fname with producer; under --seedless produces it a second
        time and requires identical bytes"""
        producer(fname)
        if not self.data.seedless:
            return
        tmp = tempfile.mkdtemp()
        try:
            other = os.path.join(tmp, os.path.basename(fname))
            producer(other)
            if not filecmp.cmp(fname, other, shallow=False):
                raise SolverError('Determinism check failed: %s differs between two runs' %
                                  os.path.basename(fname))
        finally:
            shutil.rmtree(tmp)
        self.manifest['deterministic'] = True

    def main(self):
        start = time.time()
        self.cfg = None
        self.exit_status = 0
        self.manifest = dict(command=self.__class__.__name__, version=SplashSqueeze.__version__,
                             stop_reason=None, error=None)
        try:
            self.cfg = self.read_config()
            self.manifest['config'] = self.cfg.to_dict()
            os.makedirs(self.output_dir, exist_ok=True)
            with tolerance_scope(self.cfg.tolerances):
                self.execute()
        except ValidationError as e:
            self.fail(2, e)
        except SplashError as e:
            self.fail(3, e)
        except Exception as e:
            LOGGER.exception('Unexpected failure in %s' % self.__class__.__name__)
            self.fail(3, e)
        self.manifest['timings'] = dict(wall_clock=time.time() - start)
        os.makedirs(self.output_dir, exist_ok=True)
        write_json(self.path('manifest.json'), self.manifest, indent=2)
        if self.exit_status:
            LOGGER.error('%s: %s' % (self.manifest['stop_reason'], self.manifest['error']['message']))

    def fail(self, status, error):
        self.exit_status = status
        self.manifest['stop_reason'] = 'error'
        self.manifest['error'] = dict(type=type(error).__name__, message=str(error))

    def execute(self):
        pass


class CommandLineSimulate(CommandLine):
    description = "Plasma-vacuum interface evolution towards or away from a splash"

    def __init__(self):
        self.common()

    def initial_state(self, scenario=None):
        cfg = self.cfg
        scenario = cfg.scenario if scenario is None else scenario
        if scenario not in SCENARIO_DATA:
            raise ValidationError('scenario: simulate runs %s (got %r)' % (", ".join(sorted(SCENARIO_DATA)),
                                                                          scenario))
        kind, direction = SCENARIO_DATA[scenario]
        data = build_initial_data(kind, delta_init=cfg.delta_init, nu_bar=cfg.nu_bar, n_surface=cfg.n_surface,
                                  n_theta=cfg.n_sigma_theta, n_psi=cfg.n_sigma_psi, direction=direction)
        walls = WallSet.from_config(cfg).check(data.curve)
        self.manifest['initial_data'] = dict(kind=kind, direction=direction, delta_init=data.delta_init,
                                             nu_bar=data.nu_bar, alpha_bar=float(data.alpha_bar),
                                             beta_bar=float(data.beta_bar), cr_residual=float(data.cr_residual))
        state = PlasmaVacuumState.from_initial_data(data, walls, z_star=cfg.z_star, cluster=cfg.cluster,
                                                    filter_order=cfg.filter_order)
        self.check_start(state)
        return data, state

    def check_start(self, state):
        """The vacuum must be solvable and dt within the CFL bound at t = 0"""
        delta = pinch(state.curve).delta
        floor = TOLERANCES['dtn_plus_floor']
        if len(state.context.walls.walls) and delta < floor:
            raise ValidationError('wall_radius: no vacuum field at pinch %0.3e below dtn_plus_floor %0.1e; '
                                  'set wall_height and wall_radius to null' % (delta, floor))
        _, info = assemble_rhs(state)
        limit = cfl_limit(state, info.wave_speed)
        if self.cfg.dt > limit:
            raise ValidationError('dt: %r above the CFL bound %0.3e at t = 0' % (self.cfg.dt, limit))

    def snapshot(self, state, info):
        d = self.path('snapshots')
        os.makedirs(d, exist_ok=True)
        state.curve.save(os.path.join(d, 'curve-%0.6f.json' % state.t))
        info.bulk.save(os.path.join(d, 'bulk-%0.6f.json' % state.t))

    def simulate(self, fname, state):
        cfg = self.cfg
        traj = run(state, cfg.dt, cfg.t_end, snapshot_cadence=cfg.snapshot_cadence,
                   check_cadence=cfg.check_cadence, callback=self.snapshot,
                   progress=self.data.verbose > 0 and self.data.verbose <= logging.INFO)
        write_diagnostics_csv(fname, traj.diagnostics)
        return traj

    def execute(self):
        cfg = self.cfg
        data, state = self.initial_state()
        res = dict()

        def producer(fname):
            res['traj'] = self.simulate(fname, state)

        self.deterministic(self.path('diagnostics.csv'), producer)
        traj = res['traj']
        self.manifest.update(traj.to_json())
        if cfg.scenario == 'closing':
            self.manifest['splash_time_bound'] = 2 * data.delta_init / data.nu_bar
        if traj.stop_reason not in ['splash', 't_end']:
            self.exit_status = 3
            self.manifest['error'] = dict(type=traj.stop_reason, message=traj.error)


class CommandLineVacuumFamily(CommandLine):
    scenario = 'vacuum_family'
    description = "Magnetic squeezing along a family of pinches"

    def __init__(self):
        self.common()

    def solve_family(self):
        cfg = self.cfg
        walls = WallSet.from_config(cfg)
        args = [(d, cfg.n_surface, walls, cfg.tolerances) for d in cfg.delta_family]
        if cfg.cpu_cores > 1:
            p = Pool(cfg.cpu_cores, maxtasksperchild=1)
            res = [x for x in tqdm(p.imap(family_member, args), total=len(args))]
            p.close()
            p.join()
        else:
            res = [family_member(x) for x in tqdm(args)]
        return res

    def execute(self):
        out = dict()

        def producer(fname):
            res = self.solve_family()
            family = [(c, s) for _, c, s, err in res if err is None]
            out.update(res=res, family=family, reports=squeeze_report(family))
            write_squeeze_csv(fname, out['reports'])

        self.deterministic(self.path('squeeze.csv'), producer)
        res, family, reports = out['res'], out['family'], out['reports']
        self.manifest['failures'] = {repr(d): err for d, _, _, err in res if err is not None}
        m1 = np.array([r.weighted_sup_m1 for r in reports])
        coefs = []
        for c, s in sorted(family, key=lambda x: -pinch(x[0]).delta):
            r = pinch(c)
            mid, _ = gap_samples(c, r)
            try:
                coefs.append(analyticity_defect(s, mid, 0.4 * r.delta, m_max=4).tolist())
            except SplashError as e:
                LOGGER.warning('Analyticity probe at delta=%0.3e: %s' % (r.delta, e))
                coefs.append(None)
        self.manifest['verdict'] = dict(superlinear=superlinear_decay(reports),
                                        weighted_sup_spread=float(m1.max() / m1.min() - 1),
                                        whitney_count=[r.whitney_count for r in reports])
        self.manifest['analyticity'] = coefs
        self.manifest['stop_reason'] = 'completed'


class CommandLineOperators(CommandLine):
    scenario = 'operators_only'
    description = "Operator identities on the flat line and cancellation on a curve"

    def __init__(self):
        self.common()
        self.parser.add_argument('--curve', dest='curve', default=None, type=str,
                                 help='Curve JSON for the cancellation check (default: an ellipse)')

    def flat_checks(self, n, kmax=32):
        curve = flat_line(n)
        S = single_layer(curve)
        solver = SingleLayerSolver(curve, S)
        T = double_layer_T(curve)
        Nm = dtn_minus(curve, solver, T)
        R = n_res(curve, solver, T)
        H = hilbert_transform(curve, solver=solver, T=T)
        res = dict(dtn_minus=0.0, hilbert=0.0, n_res=0.0, single_layer=0.0)
        for k in range(1, min(kmax, n // 2 - 1) + 1):
            c = np.cos(k * curve.theta)
            s = np.sin(k * curve.theta)
            res['dtn_minus'] = max(res['dtn_minus'], np.abs(Nm.dot(c) - k * c).max())
            res['hilbert'] = max(res['hilbert'], np.abs(H.dot(c) - s).max())
            res['n_res'] = max(res['n_res'], np.abs(R.dot(c)).max())
            res['single_layer'] = max(res['single_layer'], np.abs(S.dot(c) + c / k).max())
        return {k: float(v) for k, v in res.items()}

    def cancellation(self, curve):
        solver = SingleLayerSolver(curve)
        T = double_layer_T(curve)
        ks = np.arange(4, min(64, curve.n_nodes // 4) + 1)
        return dict(n_res=growth_exponent(n_res(curve, solver, T), curve, ks),
                    dtn_minus=growth_exponent(dtn_minus(curve, solver, T), curve, ks))

    def execute(self):
        n = self.cfg.n_surface
        if self.data.curve is None:
            curve = ellipse(n, 1.0, 0.6)
        else:
            try:
                curve = GridCurve.load(self.data.curve)
            except (IOError, OSError) as e:
                raise ValidationError('curve: cannot read %s (%s)' % (self.data.curve, e))
        tol = self.cfg.tolerances['residual']
        out = dict()

        def producer(fname):
            flat = self.flat_checks(n)
            canc = self.cancellation(curve)
            jumps = [jump_estimate(c) for c in [flat_line(64), circle(64, 0.5), ellipse(64, 1.0, 0.6)]]
            report = dict(flat_line=flat, cancellation=canc, jump_constants=jumps,
                          jump_spread=max(jumps) - min(jumps))
            report['passed'] = dict(flat_line=all([v <= tol for v in flat.values()]),
                                    cancellation=canc['n_res'] <= 0.1 and abs(canc['dtn_minus'] - 1) <= 0.05,
                                    jump=report['jump_spread'] <= 1e-4)
            write_json(fname, report, indent=2)
            out['report'] = report

        self.deterministic(self.path('operators.json'), producer)
        report = out['report']
        self.manifest['report'] = report
        failed = [k for k, v in report['passed'].items() if not v]
        if failed:
            raise SolverError('Operator checks failed: %s' % ", ".join(sorted(failed)))
        self.manifest['stop_reason'] = 'completed'


class CommandLineReversalCheck(CommandLineSimulate):
    scenario = 'reversal'
    description = "Forward, reverse, forward: interface return error and its order in dt"

    def execute(self):
        cfg = self.cfg
        _, state = self.initial_state('reversal')
        dts = [cfg.dt, cfg.dt / 2]
        out = dict()

        def producer(fname):
            errors = [return_error(state, dt, cfg.t_end) for dt in dts]
            report = dict(dt=dts, duration=cfg.t_end, return_error=errors)
            if errors[1] > 0:
                ratio = errors[0] / errors[1]
                report.update(ratio=ratio, order=float(np.log2(ratio)), fourth_order=bool(12 <= ratio <= 20))
            write_json(fname, report, indent=2)
            out['report'] = report

        self.deterministic(self.path('reversal.json'), producer)
        self.manifest['report'] = out['report']
        self.manifest['stop_reason'] = 'completed'


def _finish(c, output):
    if output:
        return c
    if c.exit_status:
        sys.exit(c.exit_status)


def simulate(output=False):
    "splash-simulate command line"
    c = CommandLineSimulate()
    c.parse_args()
    return _finish(c, output)


def vacuum_family(output=False):
    "splash-vacuum-family command line"
    c = CommandLineVacuumFamily()
    c.parse_args()
    return _finish(c, output)


def operators(output=False):
    "splash-operators command line"
    c = CommandLineOperators()
    c.parse_args()
    return _finish(c, output)


def reversal_check(output=False):
    "splash-reversal-check command line"
    c = CommandLineReversalCheck()
    c.parse_args()
    return _finish(c, output)
