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
Timing hooks around the public dualmg API, reported to a pluggable usage logger.
"""
import functools
import importlib
import inspect
import threading
import time
from types import ModuleType
from typing import Any, Callable, Optional, Union

from dualmg import assembly, config, mesh, multigrid, problems, smoother, spaces
from dualmg.mesh import Mesh
from dualmg.multigrid import Hierarchy, ResidualLog
from dualmg.problems import DualPoissonSystem
from dualmg.smoother import PatchSmoother


_MODULES = [config, mesh, spaces, assembly, smoother, multigrid, problems]
_CLASSES = [Mesh, PatchSmoother, Hierarchy, ResidualLog, DualPoissonSystem]
_SPECIAL_METHODS = {'__init__', '__repr__', '__len__'}


def attach(logger_module: Union[str, ModuleType]) -> None:
    """
    Attach the usage logger.

    Functions listed in ``__all__`` of the core modules and the public methods and properties
    of the core classes are replaced by wrappers that report every outermost call.

    Parameters
    ----------
    logger_module : the module or module name containing the usage logger.
        ``logger_module.get_logger()`` returns an object with ``log_success`` and
        ``log_failure``; see :mod:`dualmg.usage_logging.usage_logger`.
    """
    if isinstance(logger_module, str):
        logger_module = importlib.import_module(logger_module)

    logger = getattr(logger_module, 'get_logger')()

    for target_module in _MODULES:
        owner = target_module.__name__.split('.')[-1]
        for name in getattr(target_module, '__all__'):
            func = getattr(target_module, name)
            if inspect.isfunction(func):
                setattr(target_module, name, _wrap_function(owner, name, func, logger))

    for target_class in _CLASSES:
        owner = target_class.__name__
        for name, func in inspect.getmembers(target_class, inspect.isfunction):
            if name.startswith('_') and name not in _SPECIAL_METHODS:
                continue
            if isinstance(inspect.getattr_static(target_class, name), staticmethod):
                continue
            setattr(target_class, name, _wrap_function(owner, name, func, logger))

        for name, prop in inspect.getmembers(target_class, lambda o: isinstance(o, property)):
            if not name.startswith('_'):
                setattr(target_class, name, _wrap_property(owner, name, prop, logger))


# Set while a wrapped call runs so nested API calls are not reported.
_local = threading.local()


def _timed(logger, owner: str, name: str, signature: Optional[inspect.Signature],
           call: Callable[[], Any]) -> Any:
    if getattr(_local, 'logging', False):
        return call()
    _local.logging = True
    start = time.perf_counter()
    try:
        result = call()
    except Exception as ex:
        logger.log_failure(owner, name, ex, time.perf_counter() - start, signature)
        raise
    else:
        logger.log_success(owner, name, time.perf_counter() - start, signature)
        return result
    finally:
        _local.logging = False


def _wrap_function(owner, name, func, logger):
    signature = inspect.signature(func)

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return _timed(logger, owner, name, signature, lambda: func(*args, **kwargs))

    return wrapper


def _wrap_property(owner, name, prop, logger):

    @property
    def wrapper(self):
        return _timed(logger, owner, name, None, lambda: prop.fget(self))

    return wrapper
