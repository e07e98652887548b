# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from importlib.metadata import version, PackageNotFoundError

from .core import Params, validate, SelfSimilarProfile
from .shooting import shoot, ShootingResult

try:
    __version__ = version("hardy-ss")
except PackageNotFoundError:
    __version__ = "0+unknown"

__all__ = ['Params', 'validate', 'SelfSimilarProfile', 'shoot',
           'ShootingResult']
