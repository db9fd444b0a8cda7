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
A usage logger writing to the ``dualmg.usage_logger`` standard library logger.

Enable it with ``DUALMG_USAGE_LOGGER=dualmg.usage_logging.usage_logger``.
"""

from inspect import Signature
import logging
from typing import Any, Optional


def get_logger() -> Any:
    """ An entry point of the plug-in and return the usage logger. """
    return DualMGUsageLogger()


def _describe(class_name: str, name: str, signature: Optional[Signature]) -> str:
    if signature is None:
        return 'Property `{}.{}`'.format(class_name, name)
    params = ', '.join(p.name for p in signature.parameters.values())
    return 'Function `{}.{}({})`'.format(class_name, name, params)


class DualMGUsageLogger(object):
    """
    Logs one record per reported call.

    A usage logger plug-in provides:

        - log_success(self, class_name, name, duration, signature=None)
        - log_failure(self, class_name, name, ex, duration, signature=None)

    ``class_name`` is the module name for module level functions and ``signature`` is None for
    properties. Durations are in seconds.
    """

    def __init__(self):
        self.logger = logging.getLogger('dualmg.usage_logger')

    def log_success(self, class_name: str, name: str, duration: float,
                    signature: Optional[Signature] = None) -> None:
        if self.logger.isEnabledFor(logging.INFO):
            self.logger.info('%s finished in %.3f ms.',
                             _describe(class_name, name, signature), duration * 1000)

    def log_failure(self, class_name: str, name: str, ex: Exception, duration: float,
                    signature: Optional[Signature] = None) -> None:
        if self.logger.isEnabledFor(logging.WARNING):
            self.logger.warning('%s failed after %.3f ms: %s: %s',
                                _describe(class_name, name, signature), duration * 1000,
                                type(ex).__name__, ex)
