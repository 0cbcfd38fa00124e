from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from dpdp import defaults, logging
from dpdp.config import ConfigError, RunConfigFile, SimConfig, sim_config_from_file
from dpdp.event_log import write_event_log
from dpdp.external import ExternalPolicy
from dpdp.instances import GeneratorParams, Instance, generate_instance, read_instance
from dpdp.policies import DispatchPolicy, make_policy
from dpdp.scoring import ScoreReport
from dpdp.simulator import RunResult, RunStatus, run_to_completion
from dpdp.validation import Violation

report_format = "dpdp-run-report-v1"

exit_codes = {
    RunStatus.FINISHED: defaults.exit_ok,
    RunStatus.DISPATCH_DEADLINE: defaults.exit_deadline,
    RunStatus.TIMEOUT: defaults.exit_timeout,
    RunStatus.VALIDATION: defaults.exit_validation,
    RunStatus.PROTOCOL: defaults.exit_protocol,
    RunStatus.HORIZON_EXCEEDED: defaults.exit_horizon,
}


@dataclass(frozen=True)
class RunConfig:
    """one simulation: where the instance comes from, who decides, where results go"""

    sim_config: SimConfig = field(default_factory=SimConfig)
    instance_dir: Optional[Path] = None
    generator: Optional[GeneratorParams] = None
    policy_name: Optional[str] = None
    policy_params: dict[str, Any] = field(default_factory=dict)
    external_command: Optional[str] = None
    external_persistent: bool = False
    interaction_dir: Path = defaults.interaction_dir
    output_dir: Optional[Path] = None

    def __post_init__(self):
        if (self.instance_dir is None) == (self.generator is None):
            raise ConfigError("a run needs exactly one of an instance dir or generator params")
        if (self.policy_name is None) == (self.external_command is None):
            raise ConfigError("a run needs exactly one of a policy name or an external command")
        if self.external_command is None and self.external_persistent:
            raise ConfigError("persistent only applies to an external command")

    @property
    def round_limit(self) -> float:
        return self.sim_config.algorithm_time_limit

    @property
    def policy_label(self) -> str:
        return self.policy_name if self.policy_name is not None else "external"


def run_config_from_file(
    config_file: Optional[RunConfigFile],
    instance_dir: Optional[Path] = None,
    generator: Optional[GeneratorParams] = None,
    policy_name: Optional[str] = None,
    external_command: Optional[str] = None,
    external_persistent: Optional[bool] = None,
    interaction_dir: Optional[Path] = None,
    output_dir: Optional[Path] = None,
    **sim_overrides,
) -> RunConfig:
    """arguments win over the file, the file wins over the defaults"""
    sim_config = sim_config_from_file(config_file).with_overrides(**sim_overrides)
    policy_params: dict[str, Any] = {}
    if config_file is not None:
        if instance_dir is None and generator is None and config_file.instance is not None:
            instance_dir = Path(config_file.instance)
        if policy_name is None and external_command is None:
            policy_name = config_file.policy_name
            external_command = config_file.external_command
            if external_persistent is None:
                external_persistent = config_file.external_persistent
        if policy_name is not None and policy_name == config_file.policy_name:
            policy_params = dict(config_file.policy_params)
        if interaction_dir is None and config_file.interaction_dir is not None:
            interaction_dir = Path(config_file.interaction_dir)
    if policy_name is None and external_command is None:
        policy_name = "greedy"
    return RunConfig(
        sim_config=sim_config,
        instance_dir=instance_dir,
        generator=generator,
        policy_name=policy_name,
        policy_params=policy_params,
        external_command=external_command,
        external_persistent=bool(external_persistent),
        interaction_dir=interaction_dir or defaults.interaction_dir,
        output_dir=output_dir,
    )


def load_instance(run: RunConfig) -> Instance:
    if run.instance_dir is not None:
        return read_instance(run.instance_dir, run.sim_config)
    return generate_instance(run.generator, run.sim_config)


def run_policy(run: RunConfig) -> DispatchPolicy:
    if run.external_command is not None:
        run.interaction_dir.mkdir(parents=True, exist_ok=True)
        return ExternalPolicy(
            run.external_command,
            run.interaction_dir,
            run.round_limit,
            persistent=run.external_persistent,
        )
    return make_policy(run.policy_name, run.policy_params)


def execute(
    run: RunConfig,
    instance: Optional[Instance] = None,
    clock: Callable[[], float] = time.monotonic,
) -> RunResult:
    instance = instance or load_instance(run)
    policy = run_policy(run)
    logging.debug(
        f"running {run.policy_label} on {len(instance.orders)} orders "
        f"with {len(instance.fleet)} vehicles"
    )
    result = run_to_completion(instance, policy, clock=clock)
    if result.finished:
        logging.info(f"finished after {result.epochs} epochs, f={result.report.f}")
    else:
        logging.warning(f"run ended with {result.status.value}: {result.detail}")
    return result


def report_document(result: RunResult) -> dict:
    return {
        "format": report_format,
        "report": result.report.to_json_dict(),
        "detail": result.detail,
        "epochs": result.epochs,
        "violations": [v.to_json_dict() for v in result.violations],
    }


def write_report(file: Path, document: dict):
    file = file.expanduser()
    file.parent.mkdir(parents=True, exist_ok=True)
    file.write_text(json.dumps(document, indent=2) + "\n")


@dataclass(frozen=True)
class ReportFile:
    report: ScoreReport
    detail: str
    epochs: int
    violations: list[Violation]


def read_report(file: Path) -> ReportFile:
    document = json.loads(file.expanduser().read_text())
    file_format = document.pop("format", None)
    if file_format != report_format:
        raise ConfigError(f"{file} has format {file_format!r}, expected {report_format}")
    return ReportFile(
        report=ScoreReport.from_json_dict(document["report"]),
        detail=document.get("detail", ""),
        epochs=int(document.get("epochs", 0)),
        violations=[Violation.from_json_dict(v) for v in document.get("violations", [])],
    )


def write_run_outputs(result: RunResult, output_dir: Path, description: Optional[str] = None):
    output_dir = output_dir.expanduser()
    write_event_log(output_dir / defaults.event_log, result.events, description)
    write_report(output_dir / defaults.report, report_document(result))


def exit_code(status: RunStatus) -> int:
    return exit_codes[status]
