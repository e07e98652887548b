# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import os
import shutil
import tempfile
import unittest


class HardySSTestCase(unittest.TestCase):
    """Data-file lookup and a scratch directory per test."""

    def setUp(self):
        super().setUp()
        self.temp_dir = tempfile.mkdtemp(prefix='hardy-ss-test-')
        self.addCleanup(shutil.rmtree, self.temp_dir, ignore_errors=True)

    def get_data_path(self, filename):
        return os.path.join(os.path.dirname(__file__), 'data', filename)
