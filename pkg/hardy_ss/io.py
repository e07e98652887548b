# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from datetime import datetime, timezone
import enum
import json
import logging
import os

import numpy as np
import pandas as pd

from ._util import IntegrityError, BracketNotPositive
from .core import SelfSimilarProfile, Edge, validate
from .shooting import origin_continuation

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
# the origin overlay follows the center manifold, where w is negligible
ORIGIN_OVERLAY_XI = 1e-2


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.value
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON "
                    "serializable")


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default)


class RunDirectory:
    """Output directory of one command; every file written through it is
    listed in the run manifest."""

    def __init__(self, path, command, config):
        self.path = path
        self.command = command
        self.config = config
        self.files = []
        os.makedirs(path, exist_ok=True)

    def _target(self, name):
        self.files.append(name)
        return os.path.join(self.path, name)

    def write_json(self, name, obj):
        with open(self._target(name), 'w') as fh:
            fh.write(dumps(obj) + '\n')

    def write_csv(self, name, frame):
        frame.to_csv(self._target(name), index=False, float_format='%.17g')

    def write_text(self, name, text):
        with open(self._target(name), 'w') as fh:
            fh.write(text)

    def add(self, name):
        self.files.append(name)

    def close(self, extra=None):
        manifest = {'command': self.command,
                    'created': datetime.now(timezone.utc).isoformat(),
                    'config': self.config,
                    'files': sorted(self.files)}
        manifest.update(extra or {})
        with open(os.path.join(self.path, MANIFEST), 'w') as fh:
            fh.write(dumps(manifest) + '\n')
        logger.info("Wrote %d files to %s", len(self.files), self.path)
        return manifest


# --------------------- profiles ---------------------------------------------
def load_result(path):
    """Read a result JSON written by solve-profile, checking its integrity."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise IntegrityError(f"Cannot read {path}: {err}") from err
    missing = {'params', 'K_star', 'xi0', 'grid', 'f'} - set(data)
    if missing:
        raise IntegrityError(f"{path} lacks the keys {sorted(missing)}")
    try:
        params = validate(**data['params'])
        xi0 = data['xi0']
        xi0 = Edge.UNBOUNDED if xi0 == Edge.UNBOUNDED.value else float(xi0)
        profile = SelfSimilarProfile(np.array(data['grid']),
                                     np.array(data['f']), xi0,
                                     float(data['K_star']), params)
    except (TypeError, ValueError) as err:
        raise IntegrityError(f"{path} holds an invalid profile: {err}") \
            from err
    return data, profile


def profile_frame(profile):
    frame = profile.to_frame()
    params = profile.params
    xi = frame['xi'].to_numpy()
    near = (xi > 0) & (xi <= ORIGIN_OVERLAY_XI)
    origin = np.full(len(xi), np.nan)
    if near.any():
        try:
            origin[near] = origin_continuation(params, profile.K_const,
                                               np.log(xi[near]))
        except BracketNotPositive:
            logger.warning("No origin branch with K=%.6g below xi=%.1e",
                           profile.K_const, ORIGIN_OVERLAY_XI)
    frame['origin_branch'] = origin
    if profile.is_compact:
        gap = profile.xi0 ** 2 - xi ** 2
        amp = ((params.m - 1) / (4 * params.m)) ** (1 / (params.m - 1))
        frame['interface_branch'] = amp * np.where(
            gap > 0, gap, 0.0) ** (1 / (params.m - 1))
    return frame


# --------------------- plot scripts -----------------------------------------
def profile_plotscript(csv_name, params):
    title = f"m={params.m}, p={params.p}, N={params.N}"
    return f"""# gnuplot script: self-similar profile for {title}
set datafile separator ','
set key autotitle columnhead
set xlabel 'xi'
set ylabel 'f'
set logscale x
set yrange [0:*]
plot '{csv_name}' using 1:2 with lines lw 2 title 'f', \\
     '' using 1:3 with lines dt 2 title 'origin branch', \\
     '' using 1:4 with lines dt 3 title 'interface branch'
"""


def portrait_plotscript(csv_names):
    plots = ', \\\n     '.join(
        f"'{name}' using 2:3 with lines title '{name}'" for name in csv_names)
    plots_z = ', \\\n     '.join(
        f"'{name}' using 2:4 with lines title '{name}'" for name in csv_names)
    return f"""# gnuplot script: phase portrait projections
set datafile separator ','
set multiplot layout 1,2
set xlabel 'X'
set ylabel 'Y'
plot {plots}
set ylabel 'Z'
plot {plots_z}
unset multiplot
"""


def snapshots_plotscript(csv_names):
    plots = ', \\\n     '.join(
        f"'{name}' using 1:2 with lines title '{name}'" for name in csv_names)
    return f"""# gnuplot script: radial snapshots
set datafile separator ','
set xlabel 'r'
set ylabel 'u'
plot {plots}
"""


def snapshots_frame(snapshots):
    return pd.concat([s.to_frame().assign(t=s.t) for s in snapshots],
                     ignore_index=True)
