#
# Copyright (C) 2026 The dualmg Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

"""
Residual history plots. Needs the optional ``matplotlib`` dependency.
"""
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd

from dualmg.multigrid import ResidualLog


def _gca(rc=None):
    import matplotlib.pyplot as plt
    with plt.rc_context(rc):
        return plt.gca()


def _as_frame(log: Union[ResidualLog, pd.DataFrame]) -> pd.DataFrame:
    return log.to_frame() if isinstance(log, ResidualLog) else log


def plot_residuals(logs: Mapping[str, Union[ResidualLog, pd.DataFrame]], ax=None,
                   title: Optional[str] = None, column: str = 'res'):
    """
    Draw ``log10`` of a residual column against the record index, one line per log.

    Parameters
    ----------
    logs : mapping of label to ResidualLog or DataFrame
        Frames need the column ``column``.
    ax : matplotlib Axes, optional
    title : str, optional
    column : str
        One of 'res', 'res_a' or 'res_b'.

    Returns
    -------
    matplotlib Axes
    """
    if ax is None:
        ax = _gca()
    for label, log in logs.items():
        values = _as_frame(log)[column].to_numpy(dtype=float)
        with np.errstate(divide='ignore'):
            ax.plot(np.arange(len(values)), np.log10(values), label=str(label))
    ax.set_xlabel('step')
    ax.set_ylabel('log10 ||r||' if column == 'res' else 'log10 ||{}||'.format(column))
    if title is not None:
        ax.set_title(title)
    if len(logs) > 0:
        ax.legend()
    return ax


def save_residual_plot(logs: Mapping[str, Union[ResidualLog, pd.DataFrame]], path,
                       title: Optional[str] = None) -> None:
    """ Write :func:`plot_residuals` to an image file without a display. """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        plot_residuals(logs, ax=ax, title=title)
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)
