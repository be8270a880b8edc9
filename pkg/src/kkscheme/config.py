"""Run configuration: nested dataclasses loaded from YAML with dotted overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import yaml

from .diagnostics import Slack
from .time_integrator import IntegratorConfig


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    name: str = "affine"
    params: dict = field(default_factory=dict)
    # None: twice the largest initial radius.
    r_max_valid: float | None = None


@dataclass
class GridConfig:
    x_min: float = -2.0
    x_max: float = 2.0
    n_cells: int = 400
    boundary: str = "outflow"


@dataclass
class InitialDataConfig:
    kind: str = "riemann"
    params: dict = field(default_factory=lambda: {"left": [1.0, 1.0], "right": [2.0, 1.0], "x0": 0.0})


@dataclass
class DiagnosticsConfig:
    enabled: bool = True
    track_eta2: bool = False
    slack: Slack = field(default_factory=Slack)
    # Extra resolutions at which verify re-runs the problem to check that the
    # dissipation budget bound does not depend on dx.
    budget_resolutions: list = field(default_factory=lambda: [100, 200, 400])


@dataclass
class TestFunctionConfig:
    x_center: float = 0.5
    x_half: float = 1.0
    t_center: float = 0.25
    t_half: float = 0.2


@dataclass
class ConvergenceConfig:
    mode: str = "self"  # self | exact_transport
    resolutions: list = field(default_factory=lambda: [200, 400, 800, 1600])
    min_rate: float = 0.5
    rate_fields: list = field(default_factory=lambda: ["r"])
    min_residual_factor: float = 1.3
    test_functions: list = field(default_factory=lambda: [TestFunctionConfig()])
    random_test_functions: int = 0


@dataclass
class OutputConfig:
    directory: str = "out"
    snapshot_csv: bool = True
    snapshot_npz: bool = False


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    initial_data: InitialDataConfig = field(default_factory=InitialDataConfig)
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(snapshot_every=0.1))
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _build(default, data, path=""):
    # Missing keys keep the values of ``default`` (which may itself be nested).
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(default)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = getattr(default, name)
        where = f"{path}.{name}" if path else name
        if is_dataclass(sub):
            kwargs[name] = _build(sub, value, where)
        elif name == "test_functions":
            if not isinstance(value, list):
                raise ConfigError(f"{where}: expected a list")
            kwargs[name] = [_build(TestFunctionConfig(), v, where) for v in value]
        else:
            kwargs[name] = _coerce(sub, value, where)
    return replace(default, **kwargs)


def _coerce(default, value, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, float) and not isinstance(value, bool):
        # YAML 1.1 reads "1e-10" (no dot) as a string.
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if isinstance(default, int) and not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def from_dict(data: dict | None) -> RunConfig:
    return _build(RunConfig(), data or {})


def set_dotted(data: dict, key: str, value) -> None:
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r}: {p!r} is not a section")
    node[parts[-1]] = value


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override must look like KEY=VALUE, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from None
    return key.strip(), value


def load_config(path: str | Path | None, overrides=()) -> RunConfig:
    """Read a YAML config (or an emitted manifest) and apply KEY=VALUE overrides."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = (json.loads(text) if Path(path).suffix == ".json" else yaml.safe_load(text)) or {}
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
        if isinstance(data, dict) and "manifest_version" in data:
            data = data["config"]
    data = copy.deepcopy(data)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        set_dotted(data, key, value)
    return from_dict(data)


def default_config_yaml() -> str:
    return yaml.safe_dump(RunConfig().to_dict(), sort_keys=False)
