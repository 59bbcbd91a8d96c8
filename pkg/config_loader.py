# config_loader.py
"""
Run-config loading and validation.

Configs are YAML (schema_version 1). The document is composed to a node tree
first so every error can name the dotted field and its source line. The whole
document is validated here; commands never see a partially valid config.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import yaml
from yaml.constructor import SafeConstructor

from modules.errors import ConfigError, ParameterError
from modules.fourier_engine import PatternSpec
from modules.fovea_geometry import CircularParams, PixelGrid, RectParams, RotRectParams
from modules.sensing import PROJECTIONS, NoiseConfig
from modules.test_chart import DEFAULT_PERIODS
from utils import sha256_text

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STRUCTURES = ('circular', 'rect', 'rotrect', 'identity')
ARMS = ('uffsi', 'fsi_hr', 'fsi_lr')

StructureParams = Union[CircularParams, RectParams, RotRectParams, None]


@dataclass(frozen=True)
class SamplingConfig:
    """Exactly one of ratio, budget or reference_ratio is set"""
    ratio: Optional[float] = None
    budget: Optional[int] = None
    reference_ratio: Optional[float] = None

    @property
    def mode(self) -> str:
        if self.budget is not None:
            return 'budget'
        if self.reference_ratio is not None:
            return 'reference_ratio'
        return 'ratio'


@dataclass(frozen=True)
class CompareConfig:
    lr_factor: int = 0
    arm_ratios: Optional[Dict[str, float]] = None
    roi_box: Optional[Tuple[int, int, int, int]] = None


@dataclass(frozen=True)
class ChartConfig:
    roi_box: Optional[Tuple[int, int, int, int]] = None
    periods: Tuple[int, ...] = DEFAULT_PERIODS
    digits: str = '1234'


@dataclass(frozen=True)
class RunConfig:
    grid: PixelGrid
    structure: str
    structure_params: StructureParams
    sampling: SamplingConfig = SamplingConfig(ratio=1.0)
    pattern: PatternSpec = PatternSpec()
    noise: NoiseConfig = NoiseConfig()
    projection: str = 'pixel'
    seed: int = 0
    output_dir: Path = Path('out')
    write_png: bool = False
    display_sigma: float = 1.0
    compare: CompareConfig = CompareConfig()
    chart: ChartConfig = ChartConfig()
    threads: int = 0
    source_text: str = field(default='', repr=False, compare=False)

    @property
    def config_hash(self) -> str:
        return sha256_text(self.source_text)

    def with_overrides(self, seed: Optional[int] = None, out: Optional[Union[str, Path]] = None,
                       threads: Optional[int] = None) -> 'RunConfig':
        """Apply CLI flag overrides (--seed, --out, --threads)"""
        cfg = self
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"seed must be a non-negative integer, got {seed}", field='--seed')
            cfg = replace(cfg, seed=seed, noise=NoiseConfig(sigma=cfg.noise.sigma, seed=seed))
        if out is not None:
            cfg = replace(cfg, output_dir=Path(out))
        if threads is not None:
            if threads < 0:
                raise ConfigError(f"threads must be >= 0, got {threads}", field='--threads')
            cfg = replace(cfg, threads=threads)
        return cfg


# =============================================================================
# Node-tree walking
# =============================================================================


class _Doc:
    """Plain values of a composed YAML document plus the source line of each dotted path"""

    def __init__(self, root: yaml.Node):
        self.lines: Dict[str, int] = {}
        self._constructor = SafeConstructor()
        self.data = self._convert(root, '')

    def _convert(self, node: yaml.Node, path: str) -> Any:
        if isinstance(node, yaml.MappingNode):
            out: Dict[str, Any] = {}
            for key_node, value_node in node.value:
                key = str(self._constructor.construct_object(key_node, deep=True))
                sub = f"{path}.{key}" if path else key
                if key in out:
                    raise ConfigError("duplicate key", field=sub, line=key_node.start_mark.line + 1)
                self.lines[sub] = key_node.start_mark.line + 1
                out[key] = self._convert(value_node, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            items = []
            for i, item in enumerate(node.value):
                sub = f"{path}[{i}]"
                self.lines[sub] = item.start_mark.line + 1
                items.append(self._convert(item, sub))
            return items
        try:
            return self._constructor.construct_object(node, deep=True)
        except yaml.YAMLError as e:
            raise ConfigError(f"bad scalar: {e}", field=path or None, line=node.start_mark.line + 1)

    def line(self, path: str) -> Optional[int]:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rsplit('.', 1)[0] if '.' in path else ''
        return None

    def error(self, path: str, message: str) -> ConfigError:
        return ConfigError(message, field=path or None, line=self.line(path))


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v: Any) -> bool:
    return (isinstance(v, (int, float))) and not isinstance(v, bool)


def _section(doc: _Doc, data: Any, path: str, allowed: Sequence[str], required: Sequence[str] = ()) -> Dict[str, Any]:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise doc.error(path, "expected a mapping")
    for key in data:
        if key not in allowed:
            sub = f"{path}.{key}" if path else key
            raise doc.error(sub, f"unknown key (allowed: {', '.join(allowed)})")
    for key in required:
        if key not in data:
            raise doc.error(path, f"missing required key '{key}'")
    return data


def _typed(doc: _Doc, data: Dict[str, Any], path: str, key: str, check: Callable[[Any], bool],
           kind: str, default: Any = None) -> Any:
    if key not in data:
        return default
    value = data[key]
    if not check(value):
        raise doc.error(f"{path}.{key}", f"expected {kind}, got {value!r}")
    return value


def _pair_of_numbers(v: Any) -> bool:
    return isinstance(v, list) and len(v) == 2 and all(_is_number(x) for x in v)


def _box(v: Any) -> bool:
    return isinstance(v, list) and len(v) == 4 and all(_is_int(x) for x in v)


def _int_list(v: Any) -> bool:
    return isinstance(v, list) and len(v) >= 1 and all(_is_int(x) for x in v)


def _build(doc: _Doc, path: str, factory: Callable[..., Any], **kwargs) -> Any:
    try:
        return factory(**kwargs)
    except ParameterError as e:
        raise doc.error(path, str(e))


# =============================================================================
# Schema
# =============================================================================


_RECT_KEYS = ('center', 'm0', 'n0', 'alpha1', 'alpha2', 'cells_x', 'cells_y')


def _center(doc: _Doc, data: Dict[str, Any], path: str, grid: PixelGrid) -> Tuple[float, float]:
    center = _typed(doc, data, path, 'center', _pair_of_numbers, 'a [x, y] pair')
    if not grid.contains(center[0], center[1]):
        raise doc.error(f"{path}.center", f"fovea center {tuple(center)} lies outside the {grid.X}x{grid.Y} grid "
                                          f"(pixel centers 1..{grid.X}, 1..{grid.Y})")
    return center[0], center[1]


def _rect_params(doc: _Doc, data: Dict[str, Any], path: str, grid: PixelGrid) -> RectParams:
    center = _center(doc, data, path, grid)
    return _build(doc, path, RectParams,
                  center=(center[0], center[1]),
                  m0=_typed(doc, data, path, 'm0', _is_int, 'an integer'),
                  n0=_typed(doc, data, path, 'n0', _is_int, 'an integer'),
                  alpha1=float(_typed(doc, data, path, 'alpha1', _is_number, 'a number', 2.0)),
                  alpha2=float(_typed(doc, data, path, 'alpha2', _is_number, 'a number', 2.0)),
                  cells_x=_typed(doc, data, path, 'cells_x', _is_int, 'an odd integer'),
                  cells_y=_typed(doc, data, path, 'cells_y', _is_int, 'an odd integer'))


def _structure(doc: _Doc, data: Any, grid: PixelGrid) -> Tuple[str, StructureParams]:
    block = _section(doc, data, 'structure', STRUCTURES)
    present = [name for name in STRUCTURES if name in block]
    if len(present) != 1:
        raise doc.error('structure', f"exactly one of {', '.join(STRUCTURES)} is required, found {len(present)}")
    name = present[0]
    path = f"structure.{name}"

    if name == 'circular':
        params = _section(doc, block[name], path, ('center', 'r0', 'epsilon', 'sectors'),
                          ('center', 'r0', 'epsilon', 'sectors'))
        center = _center(doc, params, path, grid)
        return name, _build(doc, path, CircularParams,
                            center=(float(center[0]), float(center[1])),
                            r0=float(_typed(doc, params, path, 'r0', _is_number, 'a number')),
                            epsilon=float(_typed(doc, params, path, 'epsilon', _is_number, 'a number')),
                            Q=_typed(doc, params, path, 'sectors', _is_int, 'an integer'))
    if name == 'rect':
        params = _section(doc, block[name], path, _RECT_KEYS, ('center', 'm0', 'n0'))
        return name, _rect_params(doc, params, path, grid)
    if name == 'rotrect':
        params = _section(doc, block[name], path, _RECT_KEYS + ('theta',), ('center', 'm0', 'n0', 'theta'))
        theta = float(_typed(doc, params, path, 'theta', _is_number, 'a number'))
        rect = _rect_params(doc, {k: v for k, v in params.items() if k != 'theta'}, path, grid)
        return name, _build(doc, f"{path}.theta", RotRectParams, rect=rect, theta=theta)
    _section(doc, block[name], path, ())
    return name, None


def _sampling(doc: _Doc, data: Any) -> SamplingConfig:
    block = _section(doc, data, 'sampling', ('ratio', 'budget', 'reference_ratio'))
    if len(block) != 1:
        raise doc.error('sampling', "exactly one of ratio, budget, reference_ratio is required")
    ratio_ok = lambda v: _is_number(v) and 0 < v <= 1
    cfg = SamplingConfig(
        ratio=_typed(doc, block, 'sampling', 'ratio', ratio_ok, 'a ratio in (0, 1]'),
        budget=_typed(doc, block, 'sampling', 'budget', lambda v: _is_int(v) and v >= 4, 'an integer >= 4'),
        reference_ratio=_typed(doc, block, 'sampling', 'reference_ratio', ratio_ok, 'a ratio in (0, 1]'),
    )
    return cfg


def _compare(doc: _Doc, data: Any) -> CompareConfig:
    block = _section(doc, data, 'compare', ('lr_factor', 'arm_ratios', 'roi'))
    ratios = None
    if 'arm_ratios' in block:
        arms = _section(doc, block['arm_ratios'], 'compare.arm_ratios', ARMS, ARMS)
        ratios = {arm: float(_typed(doc, arms, 'compare.arm_ratios', arm, lambda v: _is_number(v) and 0 < v <= 1,
                                    'a ratio in (0, 1]')) for arm in ARMS}
    roi = _typed(doc, block, 'compare', 'roi', _box, 'an [x0, y0, x1, y1] box')
    return CompareConfig(
        lr_factor=_typed(doc, block, 'compare', 'lr_factor', lambda v: _is_int(v) and v >= 0, 'an integer >= 0', 0),
        arm_ratios=ratios,
        roi_box=tuple(roi) if roi else None,
    )


def _chart(doc: _Doc, data: Any) -> ChartConfig:
    block = _section(doc, data, 'chart', ('roi', 'periods', 'digits'))
    roi = _typed(doc, block, 'chart', 'roi', _box, 'an [x0, y0, x1, y1] box')
    periods = _typed(doc, block, 'chart', 'periods', lambda v: _int_list(v) and min(v) >= 2,
                     'a list of integers >= 2', list(DEFAULT_PERIODS))
    digits = _typed(doc, block, 'chart', 'digits', lambda v: isinstance(v, str) and v.isdigit(), 'a digit string',
                    '1234')
    return ChartConfig(roi_box=tuple(roi) if roi else None, periods=tuple(periods), digits=digits)


def _run_config(doc: _Doc, text: str) -> RunConfig:
    top = _section(doc, doc.data, '', ('schema_version', 'grid', 'structure', 'sampling', 'pattern', 'noise',
                                       'acquisition', 'seed', 'output', 'display', 'compare', 'chart'),
                   ('schema_version', 'grid', 'structure'))
    version = top['schema_version']
    if version != SCHEMA_VERSION:
        raise doc.error('schema_version', f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")

    grid_block = _section(doc, top['grid'], 'grid', ('width', 'height'), ('width', 'height'))
    grid = _build(doc, 'grid', PixelGrid,
                  X=_typed(doc, grid_block, 'grid', 'width', _is_int, 'an integer'),
                  Y=_typed(doc, grid_block, 'grid', 'height', _is_int, 'an integer'))

    structure, params = _structure(doc, top['structure'], grid)
    sampling = _sampling(doc, top['sampling']) if 'sampling' in top else SamplingConfig(ratio=1.0)

    pat = _section(doc, top.get('pattern'), 'pattern', ('a', 'b'))
    pattern = _build(doc, 'pattern', PatternSpec,
                     a=float(_typed(doc, pat, 'pattern', 'a', _is_number, 'a number', 0.5)),
                     b=float(_typed(doc, pat, 'pattern', 'b', _is_number, 'a number', 0.5)))

    seed = _typed(doc, top, '', 'seed', lambda v: _is_int(v) and v >= 0, 'a non-negative integer', 0)
    nz = _section(doc, top.get('noise'), 'noise', ('sigma',))
    noise = _build(doc, 'noise', NoiseConfig,
                   sigma=float(_typed(doc, nz, 'noise', 'sigma', _is_number, 'a number', 0.0)), seed=seed)

    acq = _section(doc, top.get('acquisition'), 'acquisition', ('projection', 'threads'))
    projection = _typed(doc, acq, 'acquisition', 'projection', lambda v: v in PROJECTIONS,
                        f"one of {', '.join(PROJECTIONS)}", 'pixel')
    threads = _typed(doc, acq, 'acquisition', 'threads', lambda v: _is_int(v) and v >= 0, 'an integer >= 0', 0)

    out = _section(doc, top.get('output'), 'output', ('dir', 'png'))
    output_dir = _typed(doc, out, 'output', 'dir', lambda v: isinstance(v, str) and v != '', 'a path', 'out')
    write_png = _typed(doc, out, 'output', 'png', lambda v: isinstance(v, bool), 'true or false', False)

    disp = _section(doc, top.get('display'), 'display', ('sigma',))
    display_sigma = float(_typed(doc, disp, 'display', 'sigma', lambda v: _is_number(v) and v > 0,
                                 'a number > 0', 1.0))

    return RunConfig(
        grid=grid,
        structure=structure,
        structure_params=params,
        sampling=sampling,
        pattern=pattern,
        noise=noise,
        projection=projection,
        seed=seed,
        output_dir=Path(output_dir),
        write_png=write_png,
        display_sigma=display_sigma,
        compare=_compare(doc, top.get('compare')),
        chart=_chart(doc, top.get('chart')),
        threads=threads,
        source_text=text,
    )


def parse_config(text: str) -> RunConfig:
    """Validate a YAML config document into a RunConfig"""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark is not None else None
        raise ConfigError(f"YAML syntax error: {e.problem}", line=line)
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML syntax error: {e}")
    if root is None:
        raise ConfigError("config is empty")
    return _run_config(_Doc(root), text)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror or e}", field=str(path))
    cfg = parse_config(text)
    logger.info("loaded config %s (structure=%s, grid %dx%d)", path, cfg.structure, cfg.grid.X, cfg.grid.Y)
    return cfg
