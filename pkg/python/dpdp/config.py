from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from dpdp.utils import parse_clock


class ConfigError(Exception):
    pass


class CompletionSemantics(enum.Enum):
    # an order is complete when its last item is unloaded
    UNLOAD_DONE = "unload-done"
    # an order is complete when the vehicle carrying its last item arrives
    ARRIVAL = "arrival"


@dataclass(frozen=True)
class SimConfig:
    epoch_length: int = 600
    epochs_per_day: int = 144
    dock_approach_time: int = 1800
    omega: int = 180
    lambda_weight: float = 10000
    dispatch_deadline: int = 14400
    algorithm_time_limit: float = 600
    rng_seed: int = 0
    completion_semantics: CompletionSemantics = CompletionSemantics.UNLOAD_DONE
    horizon_epoch: int = 1622505600
    max_days: int = 3
    # (start, end) seconds of the day, empty means no shift restrictions
    work_shifts: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        for name in (
            "epoch_length",
            "epochs_per_day",
            "dock_approach_time",
            "omega",
            "dispatch_deadline",
            "algorithm_time_limit",
            "max_days",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lambda_weight < 0:
            raise ConfigError(f"lambda must not be negative, got {self.lambda_weight}")
        for start, end in self.work_shifts:
            if not (0 <= start < end <= 86400):
                raise ConfigError(f"bad work shift {start}-{end}")

    @property
    def max_epochs(self) -> int:
        return self.max_days * self.epochs_per_day

    def in_shift(self, t: int) -> bool:
        if len(self.work_shifts) == 0:
            return True
        second = t % 86400
        return any(start <= second < end for start, end in self.work_shifts)

    def next_shift_start(self, t: int) -> int:
        """earliest time >= t inside a work shift"""
        if self.in_shift(t):
            return t
        day, second = divmod(t, 86400)
        starts = sorted(start for start, _ in self.work_shifts)
        later = [s for s in starts if s > second]
        if len(later) > 0:
            return day * 86400 + later[0]
        return (day + 1) * 86400 + starts[0]

    def service_start(self, t: int, work: int) -> int:
        """earliest start >= t of loading and unloading that lasts work seconds

        the work has to end within the shift it starts in
        work longer than every shift starts as soon as a shift is open and runs over
        """
        if len(self.work_shifts) == 0:
            return t
        if work > max(end - start for start, end in self.work_shifts):
            return self.next_shift_start(t)
        day = t // 86400
        while True:
            for start, end in sorted(self.work_shifts):
                begin = max(t, day * 86400 + start)
                if begin + work <= day * 86400 + end:
                    return begin
            day += 1

    def to_json_dict(self) -> dict:
        jd = asdict(self)
        jd["completion_semantics"] = self.completion_semantics.value
        jd["work_shifts"] = [list(w) for w in self.work_shifts]
        return jd

    @classmethod
    def from_json_dict(cls, jd: dict) -> SimConfig:
        jd = dict(jd)
        if "completion_semantics" in jd:
            jd["completion_semantics"] = CompletionSemantics(jd["completion_semantics"])
        if "work_shifts" in jd:
            jd["work_shifts"] = tuple(tuple(w) for w in jd["work_shifts"])
        return cls(**jd)

    def with_overrides(self, **overrides) -> SimConfig:
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **overrides)


def _parse_clock(text) -> int:
    # yaml reads unquoted 13:30:00 as a base 60 integer
    if isinstance(text, int):
        return text
    try:
        return parse_clock(text)
    except ValueError:
        raise ConfigError(f"not a %H:%M:%S time: {text!r}")


run_config_format = "dpdp-run-config-v1"


def maybe_create_config_file(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        return
    path.write_text(
        f"""format: {run_config_format}
simulation: # all keys optional, defaults shown
  epoch_length: 600 # seconds between two dispatch rounds
  epochs_per_day: 144
  dock_approach_time: 1800 # seconds from arrival to dock, without queuing
  omega: 180 # seconds to load or unload one standard pallet
  lambda_weight: 10000 # weight of total timeout against average distance
  dispatch_deadline: 14400 # an order undispatched for longer aborts the run
  algorithm_time_limit: 600 # seconds per round for the algorithm
  rng_seed: 0
  completion_semantics: unload-done # or arrival
  work_shifts: [] # eg, [["08:30:00", "12:00:00"], ["13:30:00", "18:00:00"]]
policy: # either name (+ params) or external
  name: greedy
  params: {{}}
# external:
#   command: python main_algorithm.py
#   persistent: false
"""
    )


@dataclass(frozen=True)
class RunConfigFile:
    """the content of a run config yaml file, everything optional"""

    simulation: dict[str, Any]
    policy_name: Optional[str]
    policy_params: dict[str, Any]
    external_command: Optional[str]
    external_persistent: bool
    instance: Optional[str]
    interaction_dir: Optional[str]


def load_config_file(path: Path) -> RunConfigFile:
    try:
        data = yaml.load(path.read_text(), yaml.SafeLoader)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")

    file_format = data.pop("format", None)
    if file_format != run_config_format:
        raise ConfigError(f"{path} has format {file_format!r}, expected {run_config_format}")

    simulation = dict(data.pop("simulation", None) or {})
    known = {f.name for f in fields(SimConfig)}
    unknown = set(simulation) - known
    if len(unknown) > 0:
        raise ConfigError(f"unknown simulation keys in {path}: {sorted(unknown)}")
    if "work_shifts" in simulation:
        simulation["work_shifts"] = tuple(
            (_parse_clock(start), _parse_clock(end))
            for start, end in simulation["work_shifts"]
        )

    policy = dict(data.pop("policy", None) or {})
    policy_name = policy.pop("name", None)
    policy_params = dict(policy.pop("params", None) or {})
    if len(policy) > 0:
        raise ConfigError(f"unexpected policy keys in {path}: {sorted(policy)}")

    external = dict(data.pop("external", None) or {})
    external_command = external.pop("command", None)
    external_persistent = bool(external.pop("persistent", False))
    if len(external) > 0:
        raise ConfigError(f"unexpected external keys in {path}: {sorted(external)}")

    instance = data.pop("instance", None)
    interaction_dir = data.pop("interaction_dir", None)

    if len(data) > 0:
        raise ConfigError(f"unexpected content left in {path}: {sorted(data)}")

    return RunConfigFile(
        simulation=simulation,
        policy_name=policy_name,
        policy_params=policy_params,
        external_command=external_command,
        external_persistent=external_persistent,
        instance=instance,
        interaction_dir=interaction_dir,
    )


def sim_config_from_file(config_file: Optional[RunConfigFile]) -> SimConfig:
    if config_file is None:
        return SimConfig()
    simulation = dict(config_file.simulation)
    try:
        if "completion_semantics" in simulation:
            simulation["completion_semantics"] = CompletionSemantics(
                simulation["completion_semantics"]
            )
        return SimConfig(**simulation)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e))
