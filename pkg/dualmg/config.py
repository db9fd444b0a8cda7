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
Infrastructure of options for dualmg.
"""
import json
from typing import Union, Any, Tuple, Callable, List, Dict

from dualmg.utils import default_workers


__all__ = ['get_option', 'set_option', 'reset_option', 'option_context']


class _NoValueType(object):

    def __repr__(self):
        return "<no value>"


_NoValue = _NoValueType()


class Option:
    """
    A named tunable with a default, the accepted types and a value check.

    Parameters
    ----------
    key : str
        Dotted name, e.g. 'smoother.pivot_tolerance'.
    doc : str
        One paragraph shown by :func:`show_options`.
    default : Any
    types : type or tuple of types
        Accepted by ``isinstance``. ``bool`` values are refused unless ``bool`` is listed,
        so that ``True`` does not pass as an ``int``.
    check_func : (callable, str)
        Predicate on the value and the message raised when it fails.

    Examples
    --------
    >>> option = Option(
    ...     key='smoother.example_tolerance',
    ...     doc="a tolerance",
    ...     default=1e-8,
    ...     types=float,
    ...     check_func=(lambda v: v > 0, "should be a positive float"))

    >>> option.validate(1)  # doctest: +NORMALIZE_WHITESPACE
    Traceback (most recent call last):
      ...
    ValueError: The value for option 'smoother.example_tolerance' was <class 'int'>;
    however, expected types are [<class 'float'>].

    >>> option.validate(-1e-3)
    Traceback (most recent call last):
      ...
    ValueError: should be a positive float

    >>> option.validate(1e-3)
    """

    def __init__(
            self,
            *,
            key: str,
            doc: str,
            default: Any,
            types: Union[Tuple[type, ...], type] = str,
            check_func: Tuple[Callable[[Any], bool], str] = (lambda v: True, "")):
        self.key = key
        self.doc = doc
        self.default = default
        self.types = types
        self.check_func = check_func

    def validate(self, v: Any) -> None:
        """ Raise ValueError naming the key when ``v`` has a wrong type or fails the check. """
        accepted = _as_tuple(self.types)
        if not isinstance(v, accepted) or (isinstance(v, bool) and bool not in accepted):
            raise ValueError("The value for option '%s' was %s; however, expected types are "
                             "[%s]." % (self.key, type(v), str(self.types)))
        predicate, message = self.check_func
        if not predicate(v):
            raise ValueError(message)


def _as_tuple(types):
    return types if isinstance(types, tuple) else (types,)


# Keep docs/source/user_guide/options.rst in sync, `show_options()` prints the table.
_options = [
    Option(
        key='display.max_rows',
        doc=(
            "Rows printed by the command line summary table. `None` prints every row. "
            "Default is 60."),
        default=60,
        types=(int, type(None)),
        check_func=(
            lambda v: v is None or v >= 0,
            "'display.max_rows' should be greater than or equal to 0.")),

    Option(
        key='assembly.quadrature_order',
        doc=(
            "The order of the triangle quadrature rule used for element integrals. "
            "Order 4 integrates the products of two RT1 fields exactly. Default is 4."),
        default=4,
        types=int,
        check_func=(
            lambda v: v in (2, 4, 6),
            "'assembly.quadrature_order' should be one of 2, 4, 6.")),

    Option(
        key='transfer.drop_tolerance',
        doc=(
            "Entries of the intergrid transfer matrices whose magnitude is below this "
            "fraction of the largest entry are treated as exact zeros. Default is 1e-14."),
        default=1e-14,
        types=float,
        check_func=(
            lambda v: v >= 0,
            "'transfer.drop_tolerance' should be greater than or equal to 0.")),

    Option(
        key='smoother.pivot_tolerance',
        doc=(
            "A dense patch system is reported singular when a pivot of its column-pivoted "
            "QR factorization falls below this fraction of the largest pivot. "
            "Default is 1e-12."),
        default=1e-12,
        types=float,
        check_func=(
            lambda v: v > 0,
            "'smoother.pivot_tolerance' should be greater than 0.")),

    Option(
        key='multigrid.divergence_threshold',
        doc=(
            "A multigrid solve stops and flags non-convergence once the residual norm grows "
            "beyond this multiple of the initial residual norm. Default is 1e10."),
        default=1e10,
        types=float,
        check_func=(
            lambda v: v > 1,
            "'multigrid.divergence_threshold' should be greater than 1.")),

    Option(
        key='compute.max_workers',
        doc=(
            "The number of independent runs of an alpha sweep executed concurrently. "
            "Defaults to the DUALMG_THREADS environment variable, or 1."),
        default=default_workers(),
        types=int,
        check_func=(
            lambda v: v >= 1,
            "'compute.max_workers' should be greater than or equal to 1.")),
]  # type: List[Option]

_options_dict = dict(zip((option.key for option in _options), _options))

# Values set by users, stored as JSON strings.
_registry = {}  # type: Dict[str, str]


class OptionError(AttributeError, KeyError):
    pass


def show_options():
    """
    Print the options as the reStructuredText table of 'docs/source/user_guide/options.rst'.
    """

    import textwrap

    widths = (33, 14, 50)
    rule = " ".join("=" * w for w in widths)
    row_format = "{:<%d} {:<%d} {}" % widths[:2]

    print(rule)
    print(row_format.format("Option", "Default", "Description"))
    print(rule)
    for option in _options:
        lines = textwrap.wrap(option.doc, widths[2])
        print(row_format.format(option.key, repr(option.default), lines[0]))
        for line in lines[1:]:
            print(row_format.format("", "", line))
    print(rule)


def get_option(key: str, default: Union[Any, _NoValueType] = _NoValue) -> Any:
    """
    Value of the option ``key``, or ``default`` (the option's own default if not given) when
    it was never set.

    Raises OptionError for an unknown key.

    Examples
    --------
    >>> get_option('assembly.quadrature_order')
    4
    >>> get_option('multigrid.divergence_threshold', 1e6)
    1000000.0
    """
    _check_option(key)
    option = _options_dict[key]
    if default is _NoValue:
        default = option.default
    option.validate(default)
    if key in _registry:
        return json.loads(_registry[key])
    return default


def set_option(key: str, value: Any) -> None:
    """
    Validate ``value`` against the option ``key`` and store it.

    Examples
    --------
    >>> set_option('assembly.quadrature_order', 6)
    >>> get_option('assembly.quadrature_order')
    6
    >>> set_option('assembly.quadrature_order', 5)
    Traceback (most recent call last):
      ...
    ValueError: 'assembly.quadrature_order' should be one of 2, 4, 6.
    >>> reset_option('assembly.quadrature_order')
    """
    _check_option(key)
    _options_dict[key].validate(value)
    _registry[key] = json.dumps(value)


def reset_option(key: str) -> None:
    """ Drop the stored value of ``key`` so that its default applies again. """
    _check_option(key)
    _registry.pop(key, None)


class option_context(object):
    """
    Set options inside a ``with`` block and restore the previous values on exit.

    Examples
    --------
    >>> with option_context('smoother.pivot_tolerance', 1e-10):
    ...     print(get_option('smoother.pivot_tolerance'))
    1e-10
    >>> get_option('smoother.pivot_tolerance')
    1e-12
    """

    def __init__(self, *args):
        if len(args) == 0 or len(args) % 2 != 0:
            raise ValueError("Need to invoke as option_context(key, value, [(key, value), ...]).")
        self.ops = list(zip(args[::2], args[1::2]))

    def __enter__(self):
        self.undo = [(key, _registry.get(key)) for key, _ in self.ops]
        for key, value in self.ops:
            set_option(key, value)

    def __exit__(self, *args):
        for key, old in self.undo:
            if old is None:
                _registry.pop(key, None)
            else:
                _registry[key] = old


def _check_option(key: str) -> None:
    if key not in _options_dict:
        raise OptionError(
            "No such option: '{}'. Available options are [{}]".format(
                key, ", ".join(list(_options_dict.keys()))))
