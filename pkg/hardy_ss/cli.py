# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace, asdict
import logging
import os
import sys

import numpy as np

from ._util import (_validate_requested_cpus, configure_logging,
                    IntegrityError, BracketNotPositive, InsufficientRange,
                    NoDominatingRadius)
from .core import validate
from . import io, pde, phase, shooting, verify

logger = logging.getLogger(__name__)

COMMANDS = ('solve-profile', 'phase-portrait', 'evolve-pde', 'verify',
            'sweep')
FORMATS = ('csv', 'json', 'plotscript')
OUTDIR_ENV = 'HARDY_SS_OUTDIR'
RESULT_FILE = 'result.json'
DEFAULT_SEEDS = ('0.5,0.5,0.5', '1.0,-0.2,0.1', '0.1,-0.1,1.0')

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
# raised as ValueError but produced by a computation, not by the arguments
NUMERIC_ERRORS = (ArithmeticError, BracketNotPositive, InsufficientRange,
                  NoDominatingRadius)


@dataclass(frozen=True)
class RunConfig:
    command: str = 'solve-profile'
    m: float = 2.0
    p: float = 1.0
    N: int = 3
    k_hardy: float = 1.0
    tol_k: float = shooting.TOL_K
    k_low: float = -1.0
    k_high: float = 1.0
    xi_start: float = shooting.XI_START
    n_samples: int = shooting.N_SAMPLES
    rtol: float = phase.RTOL
    atol: float = phase.ATOL
    outdir: str = 'hardy-ss-output'
    formats: tuple = FORMATS
    json_only: bool = False
    profile: str = None
    seeds: tuple = ()
    from_profile: bool = False
    eta_end: float = 50.0
    grid_n: int = 512
    r_max: float = 8.0
    t_end: float = 1.0
    eps_list: tuple = (0.2, 0.1, 0.05)
    n_snapshots: int = 11
    track_self_similarity: bool = False
    fresh: bool = False
    list: bool = False
    triples: tuple = ()
    n_jobs: object = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command {self.command!r}")
        for name in ('tol_k', 'xi_start', 'rtol', 'atol', 'eta_end', 'r_max',
                     't_end'):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got "
                                 f"{getattr(self, name)}")
        if any(e <= 0 for e in self.eps_list):
            raise ValueError(f"eps values must be positive, got "
                             f"{self.eps_list}")
        unknown = set(self.formats) - set(FORMATS)
        if unknown:
            raise ValueError(f"Unknown formats {sorted(unknown)}")
        if self.k_low >= self.k_high:
            raise ValueError("k_low must be below k_high")
        validate(self.m, self.p, self.N, self.k_hardy)

    @property
    def params(self):
        return validate(self.m, self.p, self.N, self.k_hardy)

    @property
    def unit_params(self):
        return validate(self.m, self.p, self.N)

    @property
    def shoot_controls(self):
        return {'K_bracket': (self.k_low, self.k_high), 'tol_K': self.tol_k,
                'xi_start': self.xi_start, 'n_samples': self.n_samples,
                'rtol': self.rtol, 'atol': self.atol}

    def wants(self, fmt):
        if fmt == 'csv' and self.json_only:
            return False
        return fmt in self.formats

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v
                for k, v in asdict(self).items()}


# --------------------- configuration ----------------------------------------
def _as_bool(text):
    lowered = str(text).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"Not a boolean: {text!r}")


def _as_list(convert):
    def parse(text):
        if isinstance(text, (list, tuple)):
            return tuple(convert(t) for t in text)
        return tuple(convert(t.strip()) for t in str(text).split(',')
                     if t.strip())
    return parse


def _as_groups(text):
    """'2,1,3; 3,2,4' -> ('2,1,3', '3,2,4')."""
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(t.strip() for t in str(text).split(';') if t.strip())


def _as_jobs(text):
    return 'auto' if str(text) == 'auto' else int(text)


_COERCE = {
    'command': str, 'm': float, 'p': float, 'N': int, 'k_hardy': float,
    'tol_k': float, 'k_low': float, 'k_high': float, 'xi_start': float,
    'n_samples': int, 'rtol': float, 'atol': float, 'outdir': str,
    'formats': _as_list(str), 'json_only': _as_bool, 'profile': str,
    'seeds': _as_groups, 'from_profile': _as_bool, 'eta_end': float,
    'grid_n': int, 'r_max': float, 't_end': float,
    'eps_list': _as_list(float), 'n_snapshots': int,
    'track_self_similarity': _as_bool, 'fresh': _as_bool, 'list': _as_bool,
    'triples': _as_groups, 'n_jobs': _as_jobs,
}


def read_config_file(path):
    """Flat ``key = value`` document; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for number, line in enumerate(fh, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValueError(f"{path}:{number}: expected 'key = value'")
            key, value = (s.strip() for s in line.split('=', 1))
            key = key.lstrip('-').replace('-', '_')
            if key not in _COERCE:
                raise ValueError(f"{path}:{number}: unknown key {key!r}")
            values[key] = _COERCE[key](value)
    return values


def build_config(command, flags, config_path=None, environ=None):
    """defaults < config file < HARDY_SS_OUTDIR < explicit flags."""
    environ = os.environ if environ is None else environ
    values = {}
    if config_path:
        values.update(read_config_file(config_path))
    if environ.get(OUTDIR_ENV):
        values['outdir'] = environ[OUTDIR_ENV]
    values.update({k: _COERCE[k](v) for k, v in flags.items()})
    values['command'] = command
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in known})


# --------------------- commands ---------------------------------------------
def _load_or_solve(config):
    if config.profile:
        data, profile = io.load_result(config.profile)
        return shooting.ShootingResult(
            K_star=float(data['K_star']),
            bracket_width=float(data.get('bracket_width', np.nan)),
            profile=profile, xi0=profile.xi0, params=profile.params,
            diagnostics=data.get('diagnostics', {}))
    logger.info("No profile given, solving for %s", config.unit_params)
    return shooting.shoot(config.unit_params, **config.shoot_controls)


def cmd_solve_profile(config):
    params = config.unit_params
    result = shooting.shoot(params, **config.shoot_controls)
    run = io.RunDirectory(config.outdir, config.command, config.to_dict())
    if config.wants('json') or config.json_only:
        run.write_json(RESULT_FILE, result.to_dict())
        run.write_json('diagnostics.json', result.diagnostics)
    if config.wants('csv'):
        run.write_csv('profile.csv', io.profile_frame(result.profile))
        if config.wants('plotscript'):
            run.write_text('profile.gp',
                           io.profile_plotscript('profile.csv', params))
    run.close({'K_star': result.K_star})
    return EXIT_OK


def _parse_seed(text):
    values = [float(v) for v in text.split(',')]
    if len(values) != 3:
        raise ValueError(f"A seed needs three coordinates X,Y,Z, got {text!r}")
    return np.array(values)


def cmd_phase_portrait(config):
    params = config.unit_params
    run = io.RunDirectory(config.outdir, config.command, config.to_dict())
    records, names = [], []

    points = []
    for point in phase.critical_points(params):
        entry = {'label': point.label, 'chart': point.chart,
                 'coordinates': point.coordinates, 'gamma': point.gamma}
        if not point.at_infinity or point.chart != 'poincare':
            lin = phase.linearize(params, point)
            entry.update(stable_dim=lin.stable_dim,
                         unstable_dim=lin.unstable_dim,
                         center_dim=lin.center_dim)
        points.append(entry)

    if config.from_profile:
        result = _load_or_solve(config)
        trace = shooting.phase_trace(result.profile, params)
        name = 'orbit_profile.csv'
        run.write_csv(name, trace.frame)
        names.append(name)
        records.append({'source': 'profile', 'file': name,
                        'x_monotone': trace.x_monotone,
                        'z_monotone': trace.z_monotone,
                        'y_negative': trace.y_negative})

    seeds = config.seeds or (() if config.from_profile else DEFAULT_SEEDS)
    for i, seed in enumerate(seeds):
        orbit = phase.integrate_phase(params, _parse_seed(seed),
                                      eta_span=(0.0, config.eta_end),
                                      on_blowup='stop')
        name = f'orbit_{i}.csv'
        run.write_csv(name, orbit.to_frame())
        names.append(name)
        records.append(dict(orbit.run_record(), source=seed, file=name))

    run.write_json('portrait.json', {'critical_points': points,
                                     'orbits': records})
    if config.wants('plotscript') and names:
        run.write_text('portrait.gp', io.portrait_plotscript(names))
    run.close()
    return EXIT_OK


def cmd_evolve_pde(config):
    params = config.params
    grid = pde.RadialGrid(0.0, config.r_max, config.grid_n)
    times = np.linspace(0.0, config.t_end, config.n_snapshots)
    unit, lam = params, 1.0
    if params.K_hardy != 1.0:
        sample = pde.make_field(pde.initial_bump, grid, params)
        unit, _, lam = pde.rescale_hardy(params, sample)
        logger.info("Hardy constant %.6g reduced to 1 with lambda=%.6g",
                    params.K_hardy, lam)
    scale = params.K_hardy ** (-1.0 / (params.m - params.p))

    def initial(r):
        return scale * pde.initial_bump(r)

    eps_list = sorted(config.eps_list)
    ordering, runs = pde.check_eps_monotonicity(
        initial, eps_list, lam * config.t_end, grid, unit, times=lam * times)
    tol_ord = ordering['tol_ord']
    giant = pde.FriendlyGiant(_load_or_solve(config).profile)

    reports = {'eps_ordering': ordering, 'supersolution': {}, 'weak': {}}
    test_fn = pde.RadialTestFunction(radius=min(2.0, config.r_max / 2),
                                     omega=1.0)
    run = io.RunDirectory(config.outdir, config.command, config.to_dict())
    names = []
    for eps in eps_list:
        snapshots = runs[eps]
        tau = pde.find_tau(giant, snapshots[0])
        reports['supersolution'][str(eps)] = pde.check_supersolution_bound(
            snapshots, giant.shifted(tau), tol_ord)
        reports['weak'][str(eps)] = pde.weak_residual(
            snapshots, test_fn, 0.0, lam * config.t_end)
        physical = pde.undo_hardy(lam, snapshots, params)
        reports.setdefault('norms', {})[str(eps)] = [
            dict(pde.lq_norms(s), t=s.t, mass=pde.mass(s)) for s in physical]
        if config.wants('csv'):
            name = f'snapshots_eps{eps:g}.csv'
            run.write_csv(name, io.snapshots_frame(physical))
            names.append(name)
        reports.setdefault('near_origin', {})[str(eps)] = \
            pde.near_origin_growth(physical).to_dict(orient='list')

    if config.track_self_similarity:
        track_grid = pde.RadialGrid(pde.DELTA, config.r_max, config.grid_n)
        deviation, _ = pde.self_similarity_track(
            giant, 1e-3, config.t_end, track_grid, config.unit_params,
            times=times)
        reports['self_similarity'] = deviation.to_dict(orient='list')

    run.write_json('reports.json', reports)
    if config.wants('plotscript') and names:
        run.write_text('snapshots.gp', io.snapshots_plotscript(names))
    passed = ordering['ok'] and all(
        r['ok'] for r in reports['supersolution'].values())
    run.close({'params': params.to_dict(), 'eps': eps_list,
               'grid': grid.to_dict(), 'dt_policy': pde.dt_policy(),
               'times': times, 'hardy_scaling': {'lambda': lam},
               'passed': passed})
    return EXIT_OK if passed else EXIT_INVARIANT


def cmd_verify(config):
    if config.list:
        for name, description in verify.catalog().items():
            print(f"{name:32s} {description}")
        return EXIT_OK

    run = io.RunDirectory(config.outdir, config.command, config.to_dict())
    path = config.profile or os.path.join(config.outdir, RESULT_FILE)
    if config.fresh or not (config.profile or os.path.exists(path)):
        result = None
    else:
        try:
            result = _load_or_solve(replace(config, profile=path))
        except IntegrityError as err:
            logger.error("%s", err)
            run.write_json('verify.json', [{'name': 'artifact.integrity',
                                            'passed': False,
                                            'detail': {'error': str(err)}}])
            run.close({'passed': False})
            return EXIT_INVARIANT

    ctx = verify.VerifyContext(
        params=config.unit_params, result=result,
        grid=pde.RadialGrid(0.0, config.r_max, config.grid_n),
        T=config.t_end, eps_list=tuple(sorted(config.eps_list)),
        shoot_controls=config.shoot_controls)
    report = verify.run(ctx)
    passed = all(entry['passed'] for entry in report)
    run.write_json('verify.json', report)
    run.close({'passed': passed})
    return EXIT_OK if passed else EXIT_INVARIANT


def _parse_triple(text):
    values = [v.strip() for v in text.split(',')]
    if len(values) != 3:
        raise ValueError(f"A triple needs m,p,N, got {text!r}")
    return float(values[0]), float(values[1]), int(values[2])


def _sweep_one(config):
    configure_logging(quiet=True)
    return cmd_solve_profile(config)


@_validate_requested_cpus
def _fan_out(configs, n_jobs=1):
    if n_jobs == 1:
        return [cmd_solve_profile(c) for c in configs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_sweep_one, configs))


def cmd_sweep(config):
    if not config.triples:
        raise ValueError("sweep needs at least one --triple m,p,N")
    configs, subdirs = [], []
    for text in config.triples:
        m, p, N = _parse_triple(text)
        subdir = f'm{m:g}_p{p:g}_N{N}'
        subdirs.append(subdir)
        configs.append(replace(config, command='solve-profile', m=m, p=p,
                               N=N, triples=(),
                               outdir=os.path.join(config.outdir, subdir)))
    codes = _fan_out(configs, n_jobs=config.n_jobs)
    run = io.RunDirectory(config.outdir, config.command, config.to_dict())
    for subdir in subdirs:
        run.add(os.path.join(subdir, io.MANIFEST))
    run.close({'exit_codes': dict(zip(subdirs, codes))})
    return max(codes)


DISPATCH = {
    'solve-profile': cmd_solve_profile,
    'phase-portrait': cmd_phase_portrait,
    'evolve-pde': cmd_evolve_pde,
    'verify': cmd_verify,
    'sweep': cmd_sweep,
}


# --------------------- argument parsing -------------------------------------
def _parser():
    common = argparse.ArgumentParser(add_help=False,
                                     argument_default=argparse.SUPPRESS)
    common.add_argument('--config', help="flat key = value config file")
    common.add_argument('--outdir', help=f"output directory (env "
                                         f"{OUTDIR_ENV})")
    common.add_argument('--m', type=float, help="diffusion exponent m > 1")
    common.add_argument('--p', type=float, help="reaction exponent 1 <= p < m")
    common.add_argument('--N', type=int, help="dimension N >= 3")
    common.add_argument('--formats', help="comma separated subset of "
                                          f"{','.join(FORMATS)}")
    common.add_argument('--tol-k', dest='tol_k', type=float)
    common.add_argument('--k-low', dest='k_low', type=float)
    common.add_argument('--k-high', dest='k_high', type=float)
    common.add_argument('--xi-start', dest='xi_start', type=float)
    common.add_argument('--n-samples', dest='n_samples', type=int)
    common.add_argument('--rtol', type=float)
    common.add_argument('--atol', type=float)
    common.add_argument('--profile', help="result JSON of a previous "
                                          "solve-profile run")
    common.add_argument('-v', '--verbose', action='store_true')
    common.add_argument('-q', '--quiet', action='store_true')

    parser = argparse.ArgumentParser(
        prog='hardy-ss',
        description="Self-similar solutions of the porous medium equation "
                    "with a Hardy potential")
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name):
        return sub.add_parser(name, parents=[common],
                              argument_default=argparse.SUPPRESS)

    solve = command('solve-profile')
    solve.add_argument('--json-only', dest='json_only', action='store_true')

    portrait = command('phase-portrait')
    portrait.add_argument('--seed', dest='seeds', action='append',
                          help="X,Y,Z starting point (repeatable)")
    portrait.add_argument('--from-profile', dest='from_profile',
                          action='store_true')
    portrait.add_argument('--eta-end', dest='eta_end', type=float)

    evolve = command('evolve-pde')
    evolve.add_argument('--k-hardy', dest='k_hardy', type=float)
    evolve.add_argument('--track-self-similarity',
                        dest='track_self_similarity', action='store_true')

    check = command('verify')
    check.add_argument('--fresh', action='store_true')
    check.add_argument('--list', action='store_true')

    for target in (evolve, check):
        target.add_argument('--grid-n', dest='grid_n', type=int)
        target.add_argument('--r-max', dest='r_max', type=float)
        target.add_argument('--t-end', dest='t_end', type=float)
        target.add_argument('--eps', dest='eps_list',
                            help="comma separated eps values")
        target.add_argument('--n-snapshots', dest='n_snapshots', type=int)

    sweep = command('sweep')
    sweep.add_argument('--triple', dest='triples', action='append',
                       help="m,p,N (repeatable)")
    sweep.add_argument('--n-jobs', dest='n_jobs',
                       help="worker processes or 'auto'")
    return parser


def main(argv=None):
    args = vars(_parser().parse_args(argv))
    command = args.pop('command')
    config_path = args.pop('config', None)
    configure_logging(verbose=args.pop('verbose', False),
                      quiet=args.pop('quiet', False))
    try:
        config = build_config(command, args, config_path)
    except ValueError as err:
        logger.error("%s", err)
        return EXIT_USAGE
    try:
        return DISPATCH[command](config)
    except IntegrityError as err:
        logger.error("%s", err)
        return EXIT_INVARIANT
    except NUMERIC_ERRORS as err:
        logger.error("Numerical failure: %s", err)
        return EXIT_NUMERIC
    except ValueError as err:
        logger.error("%s", err)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
