# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import contextlib
import io as _io
import json
import os
from unittest import mock

from . import HardySSTestCase
from .._util import OutOfRange, BracketNotPositive, InsufficientRange
from ..cli import (build_config, read_config_file, RunConfig, main,
                   OUTDIR_ENV, EXIT_OK, EXIT_INVARIANT, EXIT_USAGE,
                   EXIT_NUMERIC)
from ..io import load_result, MANIFEST
from ..verify import catalog


class ConfigTests(HardySSTestCase):

    def test_defaults(self):
        config = build_config('solve-profile', {}, environ={})
        self.assertEqual(config, RunConfig())
        self.assertEqual(config.unit_params.to_dict(),
                         {'m': 2.0, 'p': 1.0, 'N': 3, 'K_hardy': 1.0})

    def test_config_file(self):
        values = read_config_file(self.get_data_path('sample.cfg'))
        self.assertEqual(values['m'], 3.0)
        self.assertEqual(values['tol_k'], 1e-6)
        self.assertEqual(values['eps_list'], (0.1, 0.2))
        self.assertIs(values['json_only'], True)

    def test_precedence(self):
        path = self.get_data_path('sample.cfg')
        config = build_config('solve-profile', {}, path, environ={})
        self.assertEqual(config.outdir, 'from-config')
        self.assertEqual((config.m, config.p, config.N), (3.0, 2.0, 4))

        env = {OUTDIR_ENV: 'from-env'}
        config = build_config('solve-profile', {}, path, environ=env)
        self.assertEqual(config.outdir, 'from-env')

        config = build_config('solve-profile',
                              {'outdir': 'from-flag', 'm': 4.0}, path,
                              environ=env)
        self.assertEqual(config.outdir, 'from-flag')
        self.assertEqual(config.m, 4.0)
        self.assertEqual(config.p, 2.0)

    def test_unknown_key(self):
        path = os.path.join(self.temp_dir, 'bad.cfg')
        with open(path, 'w') as fh:
            fh.write('colour = blue\n')
        with self.assertRaisesRegex(ValueError, 'unknown key'):
            read_config_file(path)

    def test_line_without_value(self):
        path = os.path.join(self.temp_dir, 'bad.cfg')
        with open(path, 'w') as fh:
            fh.write('m 2\n')
        with self.assertRaisesRegex(ValueError, 'key = value'):
            read_config_file(path)

    def test_invalid_exponents(self):
        with self.assertRaises(OutOfRange):
            RunConfig(m=2.0, p=2.0)

    def test_invalid_controls(self):
        with self.assertRaises(ValueError):
            RunConfig(k_low=1.0, k_high=0.0)
        with self.assertRaises(ValueError):
            RunConfig(formats=('csv', 'png'))
        with self.assertRaises(ValueError):
            RunConfig(eps_list=(0.1, 0.0))

    def test_json_only(self):
        config = RunConfig(json_only=True)
        self.assertFalse(config.wants('csv'))
        self.assertTrue(config.wants('json'))


class MainTests(HardySSTestCase):

    def test_list_invariants(self):
        out = _io.StringIO()
        with contextlib.redirect_stdout(out):
            code = main(['verify', '--list'])
        self.assertEqual(code, EXIT_OK)
        for name in catalog():
            self.assertIn(name, out.getvalue())

    def test_invalid_exponents_exit_code(self):
        code = main(['solve-profile', '--m', '2', '--p', '2', '--outdir',
                     self.temp_dir])
        self.assertEqual(code, EXIT_USAGE)

    def test_numeric_failure_exit_code(self):
        for err in (BracketNotPositive("f crossed zero before xi_start"),
                    InsufficientRange("less than one decade")):
            with mock.patch('hardy_ss.cli.shooting.shoot',
                            side_effect=err):
                code = main(['solve-profile', '--outdir', self.temp_dir,
                             '-q'])
            self.assertEqual(code, EXIT_NUMERIC)

    def test_sweep_without_triples(self):
        code = main(['sweep', '--outdir', self.temp_dir])
        self.assertEqual(code, EXIT_USAGE)

    def test_corrupted_result(self):
        outdir = os.path.join(self.temp_dir, 'verify')
        code = main(['verify', '--profile',
                     self.get_data_path('corrupted_result.json'),
                     '--outdir', outdir])
        self.assertEqual(code, EXIT_INVARIANT)
        with open(os.path.join(outdir, 'verify.json')) as fh:
            report = json.load(fh)
        self.assertEqual(report[0]['name'], 'artifact.integrity')
        self.assertFalse(report[0]['passed'])

    def test_phase_portrait(self):
        outdir = os.path.join(self.temp_dir, 'portrait')
        code = main(['phase-portrait', '--seed', '0.5,-0.1,0.2',
                     '--eta-end', '5', '--outdir', outdir])
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(outdir, 'portrait.json')) as fh:
            portrait = json.load(fh)
        labels = {p['label'] for p in portrait['critical_points']}
        self.assertIn('P0', labels)
        self.assertEqual(len(portrait['orbits']), 1)
        self.assertTrue(os.path.exists(os.path.join(outdir, 'orbit_0.csv')))
        self.assertTrue(os.path.exists(os.path.join(outdir, 'portrait.gp')))

    def test_solve_profile(self):
        outdir = os.path.join(self.temp_dir, 'solve')
        code = main(['solve-profile', '--tol-k', '1e-6', '--n-samples', '4',
                     '--outdir', outdir, '-q'])
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(outdir, MANIFEST)) as fh:
            manifest = json.load(fh)
        self.assertEqual(sorted(manifest['files']),
                         ['diagnostics.json', 'profile.csv', 'profile.gp',
                          'result.json'])
        self.assertEqual(manifest['config']['tol_k'], 1e-6)
        data, profile = load_result(os.path.join(outdir, 'result.json'))
        self.assertEqual(data['K_star'], manifest['K_star'])
        self.assertTrue(profile.is_compact)
        self.assertLessEqual(data['bracket_width'], 1e-6)

    def test_solve_profile_json_only(self):
        outdir = os.path.join(self.temp_dir, 'solve')
        code = main(['solve-profile', '--json-only', '--tol-k', '1e-4',
                     '--n-samples', '0', '--outdir', outdir, '-q'])
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(sorted(os.listdir(outdir)),
                         ['diagnostics.json', MANIFEST, 'result.json'])

    def test_evolve_pde_with_stored_profile(self):
        outdir = os.path.join(self.temp_dir, 'pde')
        code = main(['evolve-pde', '--profile',
                     self.get_data_path('valid_result.json'),
                     '--k-hardy', '4', '--grid-n', '32', '--r-max', '4',
                     '--t-end', '0.01', '--eps', '0.2,0.1',
                     '--n-snapshots', '3', '--outdir', outdir, '-q'])
        self.assertIn(code, (EXIT_OK, EXIT_INVARIANT))
        with open(os.path.join(outdir, MANIFEST)) as fh:
            manifest = json.load(fh)
        self.assertEqual(manifest['hardy_scaling'], {'lambda': 4.0})
        self.assertEqual(manifest['eps'], [0.1, 0.2])
        self.assertIn('snapshots_eps0.1.csv', manifest['files'])
        with open(os.path.join(outdir, 'reports.json')) as fh:
            reports = json.load(fh)
        self.assertEqual(sorted(reports['weak']), ['0.1', '0.2'])
        self.assertEqual(len(reports['norms']['0.1']), 3)
