# wmv-stability/wmv_stability/utils/experiments.py
"""
Experiment configuration, command dispatch and figure presets.

Every command writes one table; figure presets write one table per series
plus a ``<preset>_meta.json`` sidecar. Outputs depend only on the config and
seed, never on worker count or wall-clock time.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from wmv_stability import config as settings
from wmv_stability.utils.core import as_trust, correctness, simulate_correctness
from wmv_stability.utils.distributions import (
    BetaMeanVar,
    ExtremeSymmetric,
    TrustworthinessDistribution,
    marginal_from_params,
)
from wmv_stability.utils.output import safe_write_frame, write_metadata
from wmv_stability.utils.sensitivity import (
    IdenticalGroupSpec,
    SweepMode,
    predict_breakpoints_identical,
    predict_breakpoints_single,
    surface_2d,
    surface_to_frame,
    sweep,
    sweep_identical,
)
from wmv_stability.utils.stability import (
    EXACT,
    Budget,
    expected_correctness_fixed_trust,
    expected_correctness_fixed_truth,
    soc_gap,
    soo,
    soo_bound_strong,
    soo_bound_weak,
)
from wmv_stability.utils.validation import CapacityError, DomainError, validate_probabilities

logger = logging.getLogger(__name__)

COMMANDS = ('correctness', 'sweep', 'surface', 'soc', 'soo', 'bounds', 'breakpoints', 'figure')


def parse_floats(text: str, field_name: str = 'value') -> List[float]:
    """Comma-separated floats."""
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError as e:
        raise DomainError(f"{field_name}: cannot parse {text!r} as numbers") from e


def parse_grid(text: str) -> List[float]:
    """``MIN,MAX,POINTS`` grid spec."""
    values = parse_floats(text, 'grid')
    if len(values) != 3:
        raise DomainError(f"grid must be MIN,MAX,POINTS, got {text!r}")
    return values


def _parse_param(key: str, text: str) -> Any:
    try:
        if '/' in text:
            return [float(x) for x in text.split('/')]
        return float(text)
    except ValueError as e:
        raise DomainError(f"distribution parameter {key}={text!r} is not numeric") from e


def parse_distribution(text: str) -> List[Dict[str, Any]]:
    """
    Parse ``KIND:key=value,...`` specs, ``;``-separated for per-source specs.

    List-valued parameters use ``/`` between entries, e.g.
    ``discrete:values=0.6/0.8,probs=0.5/0.5``.
    """
    specs = []
    for part in text.split(';'):
        part = part.strip()
        if not part:
            continue
        kind, _, rest = part.partition(':')
        params: Dict[str, Any] = {'kind': kind.strip()}
        for item in filter(None, (x.strip() for x in rest.split(','))):
            key, sep, value = item.partition('=')
            if not sep:
                raise DomainError(f"distribution parameter {item!r} must be key=value")
            params[key.strip()] = _parse_param(key.strip(), value.strip())
        specs.append(params)
    if not specs:
        raise DomainError(f"Empty distribution spec {text!r}")
    return specs


def build_distribution(text: str, means: Sequence[float]) -> TrustworthinessDistribution:
    """Distribution from a spec string; a single spec is broadcast to every source."""
    specs = parse_distribution(text)
    if len(specs) == 1:
        specs = specs * len(means)
    if len(specs) != len(means):
        raise DomainError(
            f"distribution has {len(specs)} per-source specs but there are {len(means)} sources"
        )
    marginals = []
    for spec, mean in zip(specs, means):
        params = dict(spec)
        kind = params.pop('kind')
        marginals.append(marginal_from_params(kind, mean=float(mean), **params))
    return TrustworthinessDistribution(marginals)


def grid_values(grid: Sequence[float]) -> np.ndarray:
    low, high, points = grid
    return np.linspace(float(low), float(high), int(points))


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return 'n/a'
    return f"{round(float(value), 12) + 0.0:.12g}"


@dataclass
class ExperimentConfig:
    """Everything a run needs; mirrors the command-line flags one-to-one."""
    command: str
    trust: Optional[List[float]] = None
    truth: Optional[List[float]] = None
    mode: str = 'direct'
    indices: List[int] = field(default_factory=lambda: [0])
    grid: Optional[List[float]] = None
    grid_j: Optional[List[float]] = None
    distribution: Optional[str] = None
    delta: Optional[List[float]] = None
    m: Optional[int] = None
    rest: Optional[List[float]] = None
    preset: Optional[str] = None
    exact: bool = False
    runs: int = 0
    seed: Optional[int] = None
    workers: int = 1
    output: Optional[str] = None
    format: str = 'csv'

    def validate(self) -> 'ExperimentConfig':
        """Check field values; returns self so calls can be chained."""
        if self.command not in COMMANDS:
            raise DomainError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.format not in settings.OUTPUT_FORMATS:
            raise DomainError(f"format must be one of {settings.OUTPUT_FORMATS}, got {self.format!r}")
        if self.runs < 0:
            raise DomainError(f"runs must be non-negative, got {self.runs}")
        if self.runs > 0 and self.seed is None:
            raise DomainError("seed is required when runs > 0")
        if self.seed is not None and self.seed < 0:
            raise DomainError(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise DomainError(f"workers must be at least 1, got {self.workers}")
        modes = [m.value for m in SweepMode]
        if self.mode not in modes:
            raise DomainError(f"mode must be one of {modes}, got {self.mode!r}")

        for name in ('grid', 'grid_j'):
            value = getattr(self, name)
            if value is not None:
                if len(value) != 3:
                    raise DomainError(f"{name} must be [min, max, points]")
                if int(value[2]) < 2 or int(value[2]) != value[2]:
                    raise DomainError(f"{name} needs an integer number of points >= 2, got {value[2]!r}")

        if self.command == 'figure':
            if self.preset not in settings.FIGURE_PRESETS:
                raise DomainError(f"preset must be one of {settings.FIGURE_PRESETS}, got {self.preset!r}")
            return self

        identical = self.m is not None and self.command in ('sweep', 'breakpoints')
        if identical:
            if self.m < 1:
                raise DomainError(f"m must be at least 1, got {self.m}")
            if self.rest:
                validate_probabilities(self.rest, 'trust', field='rest')
        else:
            if not self.trust:
                raise DomainError(f"trust is required for the {self.command} command")
            validate_probabilities(self.trust, 'trust', field='trust')
            if self.truth is not None:
                validate_probabilities(self.truth, 'trustworthiness', field='truth')
                if len(self.truth) != len(self.trust):
                    raise DomainError(
                        f"truth has {len(self.truth)} sources but trust has {len(self.trust)}"
                    )

        if self.command == 'surface' and len(self.indices) < 2:
            raise DomainError("surface needs two indices")
        if self.command in ('soc', 'soo') and not self.distribution:
            raise DomainError(f"distribution is required for the {self.command} command")
        if self.delta is not None and any(d < 0 for d in self.delta):
            raise DomainError(f"delta must be non-negative: {self.delta}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"Unknown config field(s): {', '.join(unknown)}")
        if 'command' not in data:
            raise DomainError("config is missing the command field")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> 'ExperimentConfig':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise DomainError(f"config is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
        return cls.from_dict(data)

    @property
    def truth_or_trust(self) -> List[float]:
        return self.truth if self.truth is not None else self.trust

    def default_grid(self) -> List[float]:
        low = 0.0 if self.mode == SweepMode.TRUTH_VARYING.value else 0.5
        return [low, 1.0, settings.FIGURE_GRID_POINTS]

    def budget(self, distribution: TrustworthinessDistribution) -> Budget:
        """Exact when asked (or when small enough and no runs given), else Monte Carlo."""
        if self.exact:
            return EXACT
        if self.runs > 0:
            return Budget(self.runs, self.seed, self.workers)
        return Budget.auto(distribution)

    def out_path(self) -> Path:
        if self.output:
            return Path(self.output)
        if self.command == 'figure':
            return Path('figures')
        return Path(f"{self.command}.{self.format}")


@dataclass
class RunResult:
    status: int
    summary: str
    paths: List[Path] = field(default_factory=list)


def _run_correctness(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    omega = correctness(cfg.trust, cfg.truth_or_trust)
    row = {'omega': omega}
    summary = f"omega={_fmt(omega)}"
    if cfg.runs > 0:
        estimate, stderr = simulate_correctness(cfg.trust, cfg.truth_or_trust, cfg.runs,
                                                cfg.seed, cfg.workers)
        row.update(estimate=estimate, stderr=stderr, runs=cfg.runs)
        summary += f" estimate={_fmt(estimate)} stderr={_fmt(stderr)}"
    return summary, pd.DataFrame([row])


def _run_sweep(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    grid = grid_values(cfg.grid or cfg.default_grid())
    if cfg.m is not None:
        spec = IdenticalGroupSpec(cfg.m, tuple(grid), tuple(cfg.rest or ()))
        result = sweep_identical(spec, cfg.mode)
    else:
        result = sweep(cfg.trust, cfg.truth_or_trust, cfg.mode, cfg.indices[0], grid)
    summary = (f"points={len(result)} min={_fmt(result.values.min())} "
               f"max={_fmt(result.values.max())} breakpoints={len(result.breakpoints)}")
    return summary, result.to_frame()


def _run_surface(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    grid_i = grid_values(cfg.grid or cfg.default_grid())
    grid_j = grid_values(cfg.grid_j) if cfg.grid_j else grid_i
    i, j = cfg.indices[0], cfg.indices[1]
    values = surface_2d(cfg.trust, cfg.truth_or_trust, cfg.mode, i, j, grid_i, grid_j)
    summary = f"cells={values.size} min={_fmt(values.min())} max={_fmt(values.max())}"
    return summary, surface_to_frame(grid_i, grid_j, values)


def _run_soc(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    distribution = build_distribution(cfg.distribution, cfg.trust)
    budget = cfg.budget(distribution)
    logger.debug(f"soc distribution: {json.dumps(distribution.to_dict())}")
    gap, stderr = soc_gap(cfg.trust, distribution, budget)
    believed = correctness(cfg.trust, cfg.trust)
    row = {
        'omega_trust': believed,
        'e_omega_mixed': believed + gap,
        'gap': gap,
        'stderr': stderr,
        'mode': budget.mode,
        'runs': budget.runs,
    }
    return f"gap={_fmt(gap)} stderr={_fmt(stderr)} mode={budget.mode}", pd.DataFrame([row])


def _run_soo(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    distribution = build_distribution(cfg.distribution, cfg.trust)
    budget = cfg.budget(distribution)
    logger.debug(f"soo distribution: {json.dumps(distribution.to_dict())}")
    report = soo(cfg.trust, distribution, budget)
    summary = (f"soo={_fmt(report.soo)} bound_strong={_fmt(report.bound_strong)} "
               f"bound_weak={_fmt(report.bound_weak)} mode={report.mode}")
    return summary, pd.DataFrame([report.to_dict()])


def _bound_row(param: float, trust: Sequence[float], deltas: Sequence[float],
               budget: Optional[Budget] = None) -> Dict[str, float]:
    """Exact SoO under symmetric extreme marginals next to both bounds."""
    t = as_trust(trust).as_array()
    d = np.broadcast_to(np.asarray(deltas, dtype=float), t.shape)
    believed = correctness(t, t)
    strong = soo_bound_strong(t, d, omega=believed)
    weak = soo_bound_weak(t, d, omega=believed)
    distribution = TrustworthinessDistribution(
        [ExtremeSymmetric(float(p), float(delta)) for p, delta in zip(t, d)]
    )
    report = soo(t, distribution, budget or Budget.auto(distribution))
    return {'param': float(param), 'soo': report.soo, 'bound_strong': strong, 'bound_weak': weak}


def _run_bounds(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    deltas = cfg.delta if cfg.delta else [settings.DEFAULT_DELTA]
    if len(deltas) not in (1, len(cfg.trust)):
        raise DomainError(f"delta has {len(deltas)} values but there are {len(cfg.trust)} sources")
    budget = None
    if cfg.runs > 0 and 2 ** len(cfg.trust) > settings.EXACT_SUPPORT_LIMIT:
        budget = Budget(cfg.runs, cfg.seed, cfg.workers)
    row = _bound_row(max(deltas), cfg.trust, deltas if len(deltas) > 1 else deltas[0], budget)
    summary = (f"strong={_fmt(row['bound_strong'])} weak={_fmt(row['bound_weak'])} "
               f"soo={_fmt(row['soo'])}")
    return summary, pd.DataFrame([row], columns=settings.BOUND_COLUMNS)


def _run_breakpoints(cfg: ExperimentConfig, quiet: bool) -> Tuple[str, pd.DataFrame]:
    if cfg.m is not None:
        points = predict_breakpoints_identical(IdenticalGroupSpec(cfg.m, (), tuple(cfg.rest or ())))
    else:
        points = predict_breakpoints_single(cfg.trust, cfg.indices[0])
    return f"breakpoints={len(points)}", pd.DataFrame({'x': points}, columns=['x'])


_HANDLERS: Dict[str, Callable[[ExperimentConfig, bool], Tuple[str, pd.DataFrame]]] = {
    'correctness': _run_correctness,
    'sweep': _run_sweep,
    'surface': _run_surface,
    'soc': _run_soc,
    'soo': _run_soo,
    'bounds': _run_bounds,
    'breakpoints': _run_breakpoints,
}


def run(cfg: ExperimentConfig, quiet: bool = False) -> RunResult:
    """
    Execute one experiment and write its output.

    Args:
        cfg: Experiment configuration
        quiet: Disable progress bars

    Returns:
        RunResult: Exit status, one-line summary and written files
    """
    try:
        cfg.validate()
        if cfg.command == 'figure':
            paths = run_figure(cfg.preset, seed=cfg.seed, output_dir=cfg.out_path(),
                               runs=cfg.runs or None, workers=cfg.workers,
                               fmt=cfg.format, quiet=quiet)
            return RunResult(settings.EXIT_CODES['ok'],
                             f"preset={cfg.preset} files={len(paths)}", paths)

        summary, frame = _HANDLERS[cfg.command](cfg, quiet)
        path = safe_write_frame(frame, cfg.out_path(), cfg.format)
        return RunResult(settings.EXIT_CODES['ok'], summary, [path])

    except CapacityError as e:
        logger.error(f"Error: {str(e)}")
        logger.debug("Full traceback:", exc_info=True)
        return RunResult(settings.EXIT_CODES['capacity'], str(e))
    except ValueError as e:
        logger.error(f"Error: {str(e)}")
        logger.debug("Full traceback:", exc_info=True)
        return RunResult(settings.EXIT_CODES['validation'], str(e))
    except OSError as e:
        logger.error(f"Error: {str(e)}")
        logger.debug("Full traceback:", exc_info=True)
        return RunResult(settings.EXIT_CODES['io'], str(e))


# Figure presets

Series = List[Tuple[str, pd.DataFrame]]


@dataclass
class PresetContext:
    seed: Optional[int]
    runs: int
    workers: int = 1
    quiet: bool = False

    @property
    def budget(self) -> Budget:
        return Budget(self.runs, self.seed, self.workers)

    def progress(self, iterable, desc: str):
        return tqdm(iterable, desc=desc, disable=self.quiet, leave=False)


@dataclass(frozen=True)
class FigurePreset:
    id: str
    description: str
    build: Callable[[PresetContext], Tuple[Series, Dict[str, Any]]]
    monte_carlo: bool = False


def _grid(low: float) -> np.ndarray:
    return np.linspace(low, 1.0, settings.FIGURE_GRID_POINTS)


def _grid_meta(low: float) -> List[float]:
    return [low, 1.0, settings.FIGURE_GRID_POINTS]


def _mc_frame(xs: Sequence[float], estimates: Sequence[float], stderrs: Sequence[float],
              runs: int) -> pd.DataFrame:
    return pd.DataFrame({
        'x': np.asarray(xs, dtype=float),
        'estimate': np.asarray(estimates, dtype=float),
        'stderr': np.asarray(stderrs, dtype=float),
        'runs': np.full(len(xs), runs, dtype=np.int64),
    }, columns=settings.MC_COLUMNS)


def _per_source_sweeps(ctx: PresetContext, desc: str, mode: SweepMode,
                       low: float) -> Tuple[Series, Dict[str, Any]]:
    example = settings.RUNNING_EXAMPLE
    grid = _grid(low)
    series, breakpoints, plateaus = [], {}, {}
    for i in ctx.progress(range(len(example)), desc):
        result = sweep(example, example, mode, i, grid)
        name = f"source{i + 1}"
        series.append((name, result.to_frame()))
        breakpoints[name] = [float(b) for b in result.breakpoints]
    meta = {'trust': list(example), 'truth': list(example), 'mode': mode.value,
            'grid': _grid_meta(low), 'breakpoints': breakpoints}
    return series, meta


def _surface(ctx: PresetContext, mode: SweepMode, low: float) -> Tuple[Series, Dict[str, Any]]:
    example = settings.RUNNING_EXAMPLE
    grid = _grid(low)
    values = surface_2d(example, example, mode, 0, 1, grid, grid)
    meta = {'trust': list(example), 'truth': list(example), 'mode': mode.value,
            'indices': [0, 1], 'grid': _grid_meta(low)}
    return [('surface', surface_to_frame(grid, grid, values))], meta


def _fig1a(ctx):
    return _per_source_sweeps(ctx, 'fig1a', SweepMode.DIRECT, 0.5)


def _fig1b(ctx):
    return _surface(ctx, SweepMode.DIRECT, 0.5)


def _fig2a(ctx):
    grid = _grid(0.5)
    rest = (settings.FIG2_REST_P, settings.FIG2_REST_P)
    series, breakpoints = [], {}
    for m in ctx.progress(settings.FIG2A_M_VALUES, 'fig2a'):
        result = sweep_identical(IdenticalGroupSpec(m, tuple(grid), rest))
        series.append((f"m{m}", result.to_frame()))
        breakpoints[f"m{m}"] = [float(b) for b in result.breakpoints]
    meta = {'m_values': list(settings.FIG2A_M_VALUES), 'rest': list(rest),
            'grid': _grid_meta(0.5), 'breakpoints': breakpoints}
    return series, meta


def _fig2b(ctx):
    grid = _grid(0.5)
    m = settings.FIG2B_M
    fixed = settings.FIG2B_N - m
    series = []
    for rest_p in ctx.progress(settings.FIG2B_REST_VALUES, 'fig2b'):
        result = sweep_identical(IdenticalGroupSpec(m, tuple(grid), (rest_p,) * fixed))
        series.append((f"rest_{rest_p:g}", result.to_frame()))
    meta = {'n': settings.FIG2B_N, 'm': m, 'rest_values': list(settings.FIG2B_REST_VALUES),
            'rest_rule': 'all fixed sources share rest_p', 'grid': _grid_meta(0.5)}
    return series, meta


def _fig3a(ctx):
    return _per_source_sweeps(ctx, 'fig3a', SweepMode.TRUTH_VARYING, 0.0)


def _fig3b(ctx):
    return _surface(ctx, SweepMode.TRUTH_VARYING, 0.0)


def _fig4a(ctx):
    return _per_source_sweeps(ctx, 'fig4a', SweepMode.TRUST_VARYING, 0.5)


def _fig4b(ctx):
    return _surface(ctx, SweepMode.TRUST_VARYING, 0.5)


def _variance_meta(ctx: PresetContext) -> Dict[str, Any]:
    return {
        'seed': ctx.seed,
        'runs': ctx.runs,
        'block_size': settings.MC_BLOCK_SIZE,
        'variance_grid': list(settings.VARIANCE_GRID),
        'variance_grid_rule': '21 log-spaced variances from 1e-4 to 1e-2',
    }


def _fig5a(ctx):
    example = settings.RUNNING_EXAMPLE
    believed = correctness(example, example)
    achieved, achieved_se, beta, beta_se = [], [], [], []
    for variance in ctx.progress(settings.VARIANCE_GRID, 'fig5a'):
        normal = TrustworthinessDistribution.from_means('truncnormal', example,
                                                        sigma=math.sqrt(variance))
        estimate, stderr = expected_correctness_fixed_trust(example, normal, ctx.budget)
        achieved.append(estimate)
        achieved_se.append(stderr)
        betas = TrustworthinessDistribution.from_means('beta', example, variance=variance)
        estimate, stderr = expected_correctness_fixed_trust(example, betas, ctx.budget)
        beta.append(estimate)
        beta_se.append(stderr)

    xs = settings.VARIANCE_GRID
    series = [
        ('believed', _mc_frame(xs, [believed] * len(xs), [0.0] * len(xs), 0)),
        ('achieved', _mc_frame(xs, achieved, achieved_se, ctx.runs)),
        ('achieved_beta', _mc_frame(xs, beta, beta_se, ctx.runs)),
    ]
    meta = dict(_variance_meta(ctx), trust=list(example),
                truncation='symmetric, half-width min(mean - 0.5, 1 - mean)',
                variance_axis='achieved: sigma**2 of the untruncated normal; '
                              'achieved_beta: Beta variance')
    return series, meta


def _fig5b(ctx):
    example = settings.RUNNING_EXAMPLE
    optimum = correctness(example, example)
    achieved, achieved_se = [], []
    for variance in ctx.progress(settings.VARIANCE_GRID, 'fig5b'):
        trust_distribution = TrustworthinessDistribution.from_means(
            'truncnormal', example, sigma=math.sqrt(variance))
        estimate, stderr = expected_correctness_fixed_truth(example, trust_distribution,
                                                            ctx.budget)
        achieved.append(estimate)
        achieved_se.append(stderr)

    xs = settings.VARIANCE_GRID
    series = [
        ('optimum', _mc_frame(xs, [optimum] * len(xs), [0.0] * len(xs), 0)),
        ('achieved', _mc_frame(xs, achieved, achieved_se, ctx.runs)),
    ]
    meta = dict(_variance_meta(ctx), truth=list(example),
                truncation='symmetric, half-width min(mean - 0.5, 1 - mean)',
                distributed_side='trust')
    return series, meta


def _fig6a(ctx):
    example = settings.RUNNING_EXAMPLE
    revealed, revealed_se, gaps = [], [], []
    for variance in ctx.progress(settings.VARIANCE_GRID, 'fig6a'):
        betas = TrustworthinessDistribution.from_means('beta', example, variance=variance)
        report = soo(example, betas, ctx.budget)
        revealed.append(report.e_omega_revealed)
        revealed_se.append(report.standard_errors['e_omega_revealed'])
        gaps.append(report.soo)

    xs = settings.VARIANCE_GRID
    series = [
        ('revealed', _mc_frame(xs, revealed, revealed_se, ctx.runs)),
        ('soo', _mc_frame(xs, gaps, revealed_se, ctx.runs)),
    ]
    meta = dict(_variance_meta(ctx), trust=list(example), distribution='beta')
    return series, meta


def _fig6b(ctx):
    mean = settings.FIG7_IDENTICAL_P
    x = np.linspace(0.0, 1.0, settings.FIGURE_GRID_POINTS)
    variances = settings.VARIANCE_GRID[::5]
    series = []
    for variance in ctx.progress(variances, 'fig6b'):
        density = BetaMeanVar(mean, variance).frozen().pdf(x)
        series.append((f"var_{variance:.3g}",
                       pd.DataFrame({'x': x, 'density': density}, columns=settings.DENSITY_COLUMNS)))
    meta = {'mean': mean, 'variances': list(variances), 'grid': [0.0, 1.0, settings.FIGURE_GRID_POINTS]}
    return series, meta


def _bounds_table(ctx: PresetContext, desc: str,
                  cases: Sequence[Tuple[float, Sequence[float], float]]) -> pd.DataFrame:
    rows = [_bound_row(param, trust, delta, EXACT)
            for param, trust, delta in ctx.progress(cases, desc)]
    return pd.DataFrame(rows, columns=settings.BOUND_COLUMNS)


def _fig7_meta(**extra) -> Dict[str, Any]:
    return dict({'distribution': 'extreme_symmetric', 'mode': 'exact'}, **extra)


def _fig7a(ctx):
    example = settings.RUNNING_EXAMPLE
    cases = [(delta, example, delta) for delta in settings.FIG7_DELTA_GRID]
    meta = _fig7_meta(trust=list(example), param='delta', delta_grid=list(settings.FIG7_DELTA_GRID))
    return [('bounds', _bounds_table(ctx, 'fig7a', cases))], meta


def _fig7b(ctx):
    p = settings.FIG7_IDENTICAL_P
    cases = [(n, (p,) * n, settings.DEFAULT_DELTA) for n in settings.FIG7_N_VALUES]
    meta = _fig7_meta(trust_value=p, param='n', delta=settings.DEFAULT_DELTA,
                      n_values=list(settings.FIG7_N_VALUES))
    return [('bounds', _bounds_table(ctx, 'fig7b', cases))], meta


def _fig7c(ctx):
    example = settings.RUNNING_EXAMPLE
    cases = [(p1, (p1,) + tuple(example[1:]), settings.DEFAULT_DELTA)
             for p1 in settings.FIG7_TRUST_GRID]
    meta = _fig7_meta(trust=list(example), varied_index=0, param='trust_1',
                      delta=settings.DEFAULT_DELTA, trust_grid=list(settings.FIG7_TRUST_GRID))
    return [('bounds', _bounds_table(ctx, 'fig7c', cases))], meta


def _fig7d(ctx):
    n = len(settings.RUNNING_EXAMPLE)
    cases = [(p, (p,) * n, settings.DEFAULT_DELTA) for p in settings.FIG7_TRUST_GRID]
    meta = _fig7_meta(n=n, param='trust', delta=settings.DEFAULT_DELTA,
                      trust_grid=list(settings.FIG7_TRUST_GRID))
    return [('bounds', _bounds_table(ctx, 'fig7d', cases))], meta


PRESETS: Dict[str, FigurePreset] = {p.id: p for p in (
    FigurePreset('fig1a', 'direct sweeps of each source of the running example', _fig1a),
    FigurePreset('fig1b', 'direct surface over sources 1 and 2', _fig1b),
    FigurePreset('fig2a', 'identical group of m sources with two fixed sources at 0.7', _fig2a),
    FigurePreset('fig2b', 'six identical sources among ten, fixed sources at rest_p', _fig2b),
    FigurePreset('fig3a', 'truth-varying sweeps of each source', _fig3a),
    FigurePreset('fig3b', 'truth-varying surface over sources 1 and 2', _fig3b),
    FigurePreset('fig4a', 'trust-varying staircase sweeps of each source', _fig4a),
    FigurePreset('fig4b', 'trust-varying surface over sources 1 and 2', _fig4b),
    FigurePreset('fig5a', 'believed vs achieved correctness under unbiased uncertain truth',
                 _fig5a, monte_carlo=True),
    FigurePreset('fig5b', 'achieved correctness under uncertain trust around fixed truth',
                 _fig5b, monte_carlo=True),
    FigurePreset('fig6a', 'revealed correctness and SoO under Beta truth', _fig6a,
                 monte_carlo=True),
    FigurePreset('fig6b', 'Beta densities for a subset of the variance grid', _fig6b),
    FigurePreset('fig7a', 'SoO and bounds against delta', _fig7a),
    FigurePreset('fig7b', 'SoO and bounds against source count', _fig7b),
    FigurePreset('fig7c', 'SoO and bounds against the trust of source 1', _fig7c),
    FigurePreset('fig7d', 'SoO and bounds against a shared trust value', _fig7d),
)}


def run_figure(preset: str, seed: Optional[int] = None, output_dir: Path = Path('figures'),
               runs: Optional[int] = None, workers: int = 1, fmt: str = 'csv',
               quiet: bool = False) -> List[Path]:
    """
    Write the data series behind one figure.

    Args:
        preset: Preset id, e.g. 'fig4a'
        seed: Master seed, required for Monte Carlo presets
        output_dir: Directory for the series files and metadata sidecar
        runs: Monte Carlo runs per point (defaults to DEFAULT_RUNS)
        workers: Worker threads for sampling
        fmt: 'csv' or 'json'
        quiet: Disable progress bars

    Returns:
        List[Path]: Series files followed by the metadata file
    """
    if preset not in PRESETS:
        raise DomainError(f"Unknown preset {preset!r}; expected one of {settings.FIGURE_PRESETS}")
    figure = PRESETS[preset]
    if figure.monte_carlo and seed is None:
        raise DomainError(f"seed is required for the Monte Carlo preset {preset}")

    ctx = PresetContext(seed=seed, runs=runs or settings.DEFAULT_RUNS, workers=workers, quiet=quiet)
    logger.info(f"Building {preset}: {figure.description}")
    series, meta = figure.build(ctx)

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, frame in series:
        paths.append(safe_write_frame(frame, output_dir / f"{preset}_{name}.{fmt}", fmt))

    meta = dict(meta, preset=preset, description=figure.description, format=fmt,
                files=[p.name for p in paths], monte_carlo=figure.monte_carlo)
    paths.append(write_metadata(meta, output_dir / f"{preset}_meta.json"))
    logger.info(f"Finished {preset}: {len(paths):,} files in {output_dir}")
    return paths
