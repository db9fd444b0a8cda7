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
Experiment driver: build a benchmark, run smoothing, multigrid or direct solves over a sweep
of Robin parameters and write residual logs with a JSON summary.
"""
import argparse
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from dualmg.assembly import MaterialParams, direct_solve
from dualmg.config import OptionError, get_option
from dualmg.exceptions import CoarseSolveError, ConfigurationError, MeshError, \
    QuadratureError, SingularLocalSystem
from dualmg.mesh import patches, refine_uniform
from dualmg.multigrid import CycleConfig, Hierarchy, ResidualLog, build_hierarchy, solve
from dualmg.problems import ProblemSpec, cook_problem, dual_poisson_robin, face_problem, \
    manufactured_elasticity, unit_square
from dualmg.smoother import BCKind, PatchSmoother, SmootherConfig


__all__ = ['RunConfig', 'run', 'summarize', 'main']

logger = logging.getLogger(__name__)

PROBLEMS = ('cook', 'face', 'dual_poisson', 'manufactured')
MODES = ('smooth_only', 'vcycle', 'two_grid', 'direct')
_MIN_REFINEMENTS = {'smooth_only': 0, 'direct': 0, 'vcycle': 1, 'two_grid': 1}


def _manufactured_classifier(midpoint) -> str:
    return 'D' if midpoint[0] < 1e-9 or midpoint[1] < 1e-9 else 'N'


@dataclass(frozen=True)
class RunConfig(object):
    """
    A validated experiment configuration.

    Examples
    --------
    >>> RunConfig(problem='cook', mode='vcycle', refinements=2, alphas=(0, 1)).alphas
    (0.0, 1.0)
    >>> RunConfig(problem='cook', mode='vcycle', refinements=0)
    Traceback (most recent call last):
      ...
    dualmg.exceptions.ConfigurationError: Mode 'vcycle' needs refinements >= 1, got 0.
    """
    problem: str = 'cook'
    mode: str = 'vcycle'
    refinements: int = 2
    alphas: Tuple[float, ...] = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)
    pre_smooth: int = 5
    post_smooth: int = 5
    sweeps: int = 100
    tol: float = 1e-8
    max_cycles: int = 50
    bc_kind: str = 'robin'
    mu: float = 1.0
    lam: Union[float, str] = 'inf'
    divisions: int = 3
    initial_guess: str = 'zero'
    seed: Optional[int] = None
    out: str = 'results'

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError("Unknown problem {!r}; expected one of {}."
                                     .format(self.problem, ', '.join(PROBLEMS)))
        if self.mode not in MODES:
            raise ConfigurationError("Unknown mode {!r}; expected one of {}."
                                     .format(self.mode, ', '.join(MODES)))
        alphas = self.alphas
        if isinstance(alphas, (int, float)):
            alphas = (alphas,)
        alphas = tuple(float(a) for a in alphas)
        if len(alphas) == 0:
            raise ConfigurationError("The alpha list should not be empty.")
        if any(not a >= 0 for a in alphas):
            raise ConfigurationError("Every alpha should be >= 0, got {}.".format(list(alphas)))
        object.__setattr__(self, 'alphas', alphas)
        minimum = _MIN_REFINEMENTS[self.mode]
        if self.refinements < minimum:
            raise ConfigurationError("Mode {!r} needs refinements >= {}, got {}."
                                     .format(self.mode, minimum, self.refinements))
        if self.problem == 'dual_poisson' and self.mode != 'direct':
            raise ConfigurationError("The dual Poisson problem only supports mode 'direct'.")
        if self.initial_guess not in ('zero', 'random'):
            raise ConfigurationError("initial_guess should be 'zero' or 'random', got {!r}."
                                     .format(self.initial_guess))
        if self.sweeps < 0 or self.divisions < 1:
            raise ConfigurationError("sweeps should be >= 0 and divisions >= 1.")
        BCKind.parse(self.bc_kind)
        MaterialParams.from_values(self.mu, self.lam)
        self.cycle_config(self.alphas[0])

    @property
    def material(self) -> MaterialParams:
        return MaterialParams.from_values(self.mu, self.lam)

    def smoother_config(self, alpha: float) -> SmootherConfig:
        return SmootherConfig(bc_kind=BCKind.parse(self.bc_kind), alpha=alpha)

    def cycle_config(self, alpha: float) -> CycleConfig:
        mode = 'two_grid' if self.mode == 'two_grid' else 'vcycle'
        return CycleConfig(self.pre_smooth, self.post_smooth, mode, self.smoother_config(alpha),
                           self.tol, self.max_cycles)

    @staticmethod
    def from_dict(values: Dict[str, Any]) -> 'RunConfig':
        known = {f.name for f in fields(RunConfig)}
        values = dict(values)
        if 'alpha' in values and 'alphas' not in values:
            values['alphas'] = values.pop('alpha')
        unknown = sorted(set(values) - known)
        if len(unknown) > 0:
            raise ConfigurationError("Unknown configuration keys: {}.".format(', '.join(unknown)))
        if 'alphas' in values and not isinstance(values['alphas'], (int, float)):
            values['alphas'] = tuple(values['alphas'])
        return RunConfig(**values)

    @staticmethod
    def from_json(path) -> 'RunConfig':
        with open(path) as f:
            try:
                values = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigurationError("Invalid JSON in {}: {}".format(path, e))
        if not isinstance(values, dict):
            raise ConfigurationError("The configuration in {} should be a JSON object."
                                     .format(path))
        return RunConfig.from_dict(values)

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values['alphas'] = list(self.alphas)
        if isinstance(self.lam, float) and math.isinf(self.lam):
            values['lam'] = 'inf'
        return values


@dataclass(frozen=True, eq=False)
class RunResult(object):
    """ Outcome of one ``alpha`` of a run. """
    problem: str
    mode: str
    alpha: float
    dofs: List[int]
    log: ResidualLog
    converged: bool
    iterations: Optional[int]
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def contraction_factor(self) -> float:
        return self.log.contraction_factor()

    @property
    def csv_name(self) -> str:
        return '{}_{}_alpha_{:g}.csv'.format(self.problem, self.mode, self.alpha)

    def to_summary(self) -> Dict[str, Any]:
        factor = self.contraction_factor
        summary = {'problem': self.problem, 'mode': self.mode, 'alpha': self.alpha,
                   'dofs': [int(d) for d in self.dofs], 'iterations': self.iterations,
                   'converged': bool(self.converged),
                   'contraction_factor': None if math.isnan(factor) else factor,
                   'csv': self.csv_name}
        summary.update(self.extra)
        return summary


def _problem(config: RunConfig) -> ProblemSpec:
    mat = config.material
    if config.problem == 'cook':
        return cook_problem(0, mat, config.divisions)[0]
    if config.problem == 'face':
        return face_problem(0, mat)[0]
    mesh = unit_square(config.divisions, _manufactured_classifier)
    return manufactured_elasticity(mesh, mat)[0]


def _initial_state(config: RunConfig, n: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    if config.initial_guess == 'zero':
        return np.zeros(n), np.zeros(m)
    rng = np.random.RandomState(config.seed)
    return rng.standard_normal(n), rng.standard_normal(m)


def _smooth_only(config: RunConfig, spec: ProblemSpec, alpha: float) -> RunResult:
    mesh = spec.hierarchy(config.refinements).finest
    system = spec.system(mesh)
    smoother = PatchSmoother(system, patches(mesh), config.smoother_config(alpha))
    y, z = _initial_state(config, system.n, system.m)
    x = np.concatenate([y, z])
    log = ResidualLog()

    def record(step, x):
        res = system.residuals(*system.split(x))
        log.append(step, 'sweep' if step > 0 else 'initial', res.norm, res.norm_a, res.norm_b)

    record(0, x)
    smoother.smooth(x, system.rhs, config.sweeps, lambda step, x: record(step + 1, x))
    res = log.cycle_residuals()
    converged = bool(res[-1] <= config.tol * res[0])
    return RunResult(config.problem, config.mode, alpha, [system.size], log, converged,
                     log.iterations_to(config.tol))


def _direct(config: RunConfig, spec: ProblemSpec, alpha: float) -> RunResult:
    system = spec.system(spec.hierarchy(config.refinements).finest)
    log = ResidualLog()
    res = system.residuals(np.zeros(system.n), np.zeros(system.m))
    log.append(0, 'initial', res.norm, res.norm_a, res.norm_b)
    y, z = direct_solve(system)
    res = system.residuals(y, z)
    log.append(1, 'direct', res.norm, res.norm_a, res.norm_b)
    return RunResult(config.problem, config.mode, alpha, [system.size], log, True, 1)


def _multigrid(config: RunConfig, hierarchy: Hierarchy, alpha: float) -> RunResult:
    cfg = config.cycle_config(alpha)
    levels = hierarchy.with_smoother(cfg.smoother)
    finest = levels.finest.system
    result = solve(levels, cfg, _initial_state(config, finest.n, finest.m))
    return RunResult(config.problem, config.mode, alpha, levels.dofs, result.log,
                     result.converged, result.cycles if result.converged else None)


def _dual_poisson(config: RunConfig, alpha: float) -> RunResult:
    mesh = unit_square(config.divisions)
    for _ in range(config.refinements):
        mesh, _ = refine_uniform(mesh)
    system = dual_poisson_robin(mesh, alpha)
    robin = system.robin_matrix()
    difference = robin - system.dirichlet_matrix()
    equal = difference.count_nonzero() == 0
    sigma, u = system.solve('robin')
    residual = system.rhs() - robin @ np.concatenate([sigma, u])
    log = ResidualLog()
    rhs = system.rhs()
    log.append(0, 'initial', np.linalg.norm(rhs), np.linalg.norm(rhs[:system.n]),
               np.linalg.norm(rhs[system.n:]))
    log.append(1, 'direct', np.linalg.norm(residual), np.linalg.norm(residual[:system.n]),
               np.linalg.norm(residual[system.n:]))
    return RunResult(config.problem, config.mode, alpha, [robin.shape[0]], log, True, 1,
                     {'robin_equals_dirichlet': bool(equal)})


def _run_alphas(config: RunConfig) -> List[RunResult]:
    alphas = list(config.alphas)
    workers = max(1, min(get_option('compute.max_workers'), len(alphas)))
    if config.problem == 'dual_poisson':
        task = lambda alpha: _dual_poisson(config, alpha)  # noqa: E731
    else:
        spec = _problem(config)
        if config.mode == 'smooth_only':
            task = lambda alpha: _smooth_only(config, spec, alpha)  # noqa: E731
        elif config.mode == 'direct':
            result = _direct(config, spec, alphas[0])
            return [replace(result, alpha=alpha) for alpha in alphas]
        else:
            hierarchy = build_hierarchy(spec.mesh, config.refinements, spec.mat, spec.loads,
                                        config.smoother_config(alphas[0]))
            task = lambda alpha: _multigrid(config, hierarchy, alpha)  # noqa: E731
    if workers == 1:
        return [task(alpha) for alpha in alphas]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(task, alphas))


def run(config: RunConfig, plot: bool = False) -> Tuple[int, List[RunResult]]:
    """
    Execute a configuration and write its artifacts into ``config.out``.

    Every ``alpha`` writes a CSV with the columns ``cycle,event,res,res_a,res_b``;
    ``summary.json`` holds the configuration and one summary per ``alpha``.

    Returns
    -------
    (int, list of RunResult)
        Exit status 0 and the results. Non-convergence is reported, not failed.
    """
    logger.info("Running %s/%s with refinements=%d, alphas=%s.", config.problem, config.mode,
                config.refinements, list(config.alphas))
    results = _run_alphas(config)
    os.makedirs(config.out, exist_ok=True)
    for result in results:
        result.log.to_csv(os.path.join(config.out, result.csv_name))
    summary = {'config': config.to_dict(), 'runs': [r.to_summary() for r in results]}
    with open(os.path.join(config.out, 'summary.json'), 'w') as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    if plot:
        _plot(config, results)
    for result in results:
        if not result.converged:
            logger.warning("alpha=%g did not converge.", result.alpha)
    return 0, results


def _plot(config: RunConfig, results: Sequence[RunResult]) -> None:
    try:
        from dualmg.plot import save_residual_plot
    except ImportError as e:
        logger.warning("Skipping the residual plot, matplotlib is unavailable: %s", e)
        return
    path = os.path.join(config.out, 'residuals.png')
    save_residual_plot({'alpha={:g}'.format(r.alpha): r.log for r in results}, path,
                       title='{} {}'.format(config.problem, config.mode))


def _summary_rows(output) -> List[Dict[str, Any]]:
    if isinstance(output, RunResult):
        return [output.to_summary()]
    if isinstance(output, (str, bytes, os.PathLike)):
        path = os.path.join(output, 'summary.json') if os.path.isdir(output) else output
        with open(path) as f:
            return list(json.load(f)['runs'])
    if isinstance(output, dict):
        return list(output['runs']) if 'runs' in output else [output]
    raise TypeError("Cannot summarize an object of type {}.".format(type(output).__name__))


def summarize(outputs: Sequence) -> pd.DataFrame:
    """
    Comparison table of completed runs.

    Parameters
    ----------
    outputs : sequence
        RunResult objects, summary dicts, ``summary.json`` paths or output directories.

    Returns
    -------
    DataFrame
        Columns ``problem, mode, alpha, dofs, iterations, contraction_factor, converged``
        with ``dofs`` the finest level size.
    """
    rows = []
    for output in outputs:
        for run in _summary_rows(output):
            rows.append({'problem': run['problem'], 'mode': run['mode'],
                         'alpha': float(run['alpha']), 'dofs': int(run['dofs'][-1]),
                         'iterations': run['iterations'],
                         'contraction_factor': (float('nan') if run['contraction_factor'] is None
                                                else float(run['contraction_factor'])),
                         'converged': bool(run['converged'])})
    columns = ['problem', 'mode', 'alpha', 'dofs', 'iterations', 'contraction_factor',
               'converged']
    return pd.DataFrame(rows, columns=columns)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dualmg', description='Patch-smoothed multigrid for dual mixed elasticity.')
    parser.add_argument('--config', help='JSON file with RunConfig fields.')
    parser.add_argument('--problem', choices=PROBLEMS)
    parser.add_argument('--mode', choices=MODES)
    parser.add_argument('--alpha', type=float, nargs='+', help='Robin parameters to sweep.')
    parser.add_argument('--refine', type=int, help='Uniform refinements of the coarse mesh.')
    parser.add_argument('--tol', type=float, help='Relative residual reduction to reach.')
    parser.add_argument('--out', help='Output directory.')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    parser.add_argument('--plot', action='store_true', help='Also write residuals.png.')
    return parser


def _config_from_args(args) -> RunConfig:
    values = {}  # type: Dict[str, Any]
    if args.config is not None:
        values.update(RunConfig.from_json(args.config).to_dict())
    overrides = {'problem': args.problem, 'mode': args.mode, 'alphas': args.alpha,
                 'refinements': args.refine, 'tol': args.tol, 'out': args.out}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command line entry point.

    Returns 0 on completion, 2 for an invalid configuration and 1 when building or solving
    fails.
    """
    args = _parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        config = _config_from_args(args)
    except (ValueError, OptionError, OSError, TypeError) as e:
        logger.error("Invalid configuration: %s", e)
        return 2
    try:
        status, results = run(config, plot=args.plot)
    except (ConfigurationError, OptionError) as e:
        logger.error("Invalid configuration: %s", e)
        return 2
    except (MeshError, QuadratureError, SingularLocalSystem, CoarseSolveError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1
    with pd.option_context('display.max_rows', get_option('display.max_rows')):
        print(summarize(results).to_string(index=False))
    return status
