import json
import sys
from pathlib import Path
from typing import Optional

import click

from dpdp import defaults, logging
from dpdp.bench import (
    BenchInstance,
    BenchPolicy,
    bench_records,
    format_bench_table,
    run_bench,
    write_bench_csv,
)
from dpdp.config import (
    CompletionSemantics,
    ConfigError,
    RunConfigFile,
    load_config_file,
    maybe_create_config_file,
    sim_config_from_file,
)
from dpdp.event_log import EventLogFormatError, read_event_log
from dpdp.external import serve_round, serve_rounds
from dpdp.instances import (
    GeneratorParams,
    InfeasibleParameters,
    InstanceFormatError,
    generate_instance,
    read_instance,
    write_instance,
)
from dpdp.interaction import InteractionError, read_dispatch_files, read_snapshot_json
from dpdp.policies import make_policy, policy_names
from dpdp.runs import (
    execute,
    exit_code,
    load_instance,
    read_report,
    report_format,
    run_config_from_file,
    write_run_outputs,
    write_report,
)
from dpdp.scoring import OracleFailure, compare_reports, replay_score
from dpdp.validation import validate_dispatch

path_type = click.Path(path_type=Path)


@click.group()
@click.option("--verbose/--no-verbose", default=False)
@click.option("--quiet/--no-quiet", default=False)
def cli(verbose, quiet):
    logging.verbose = verbose
    logging.quiet = quiet


def sim_options(f):
    options = [
        click.option("--config", "config_path", type=path_type, default=None),
        click.option("--seed", "rng_seed", type=int, default=None),
        click.option("--epoch-length", type=click.IntRange(min=1), default=None),
        click.option("--lambda", "lambda_weight", type=click.FloatRange(min=0), default=None),
        click.option("--deadline", "dispatch_deadline", type=click.IntRange(min=1), default=None),
        click.option(
            "--round-limit", "algorithm_time_limit", type=click.FloatRange(min=0), default=None
        ),
        click.option(
            "--completion",
            "completion_semantics",
            type=click.Choice([c.value for c in CompletionSemantics]),
            default=None,
        ),
        click.option("--omega", type=click.IntRange(min=1), default=None),
        click.option("--dock-approach", "dock_approach_time", type=click.IntRange(min=1), default=None),
        click.option("--max-days", type=click.IntRange(min=1), default=None),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def generator_options(f):
    options = [
        click.option("--orders", type=click.IntRange(min=1), default=50),
        click.option("--vehicles", type=click.IntRange(min=1), default=5),
        click.option("--factories", type=click.IntRange(min=2), default=10),
        click.option("--capacity", type=click.IntRange(min=1), default=15),
        click.option("--horizon", type=click.IntRange(min=1), default=86400),
        click.option("--lead-time", type=click.IntRange(min=1), default=14400),
        click.option("--oversize-rate", type=click.FloatRange(0, 1), default=0.02),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def generator_params(seed: int, gen: dict) -> GeneratorParams:
    return GeneratorParams(
        factory_count=gen["factories"],
        vehicle_count=gen["vehicles"],
        order_count=gen["orders"],
        horizon=gen["horizon"],
        capacity=gen["capacity"],
        committed_lead_time=gen["lead_time"],
        oversize_rate=gen["oversize_rate"],
        seed=seed,
    )


def split_generator_options(kwargs: dict) -> dict:
    names = ["orders", "vehicles", "factories", "capacity", "horizon", "lead_time", "oversize_rate"]
    return {name: kwargs.pop(name) for name in names}


def sim_overrides(sim: dict) -> dict:
    sim = dict(sim)
    if sim.get("completion_semantics") is not None:
        sim["completion_semantics"] = CompletionSemantics(sim["completion_semantics"])
    return sim


def config_file_or_none(path: Optional[Path]) -> Optional[RunConfigFile]:
    if path is None:
        return None
    try:
        return load_config_file(path)
    except ConfigError as e:
        raise click.UsageError(str(e))


def sim_config(config_path: Optional[Path], sim: dict):
    try:
        return sim_config_from_file(config_file_or_none(config_path)).with_overrides(
            **sim_overrides(sim)
        )
    except ConfigError as e:
        raise click.UsageError(str(e))


def read_instance_or_exit(directory: Path, config):
    try:
        return read_instance(directory, config)
    except InstanceFormatError as e:
        raise click.UsageError(f"{directory}: {e}")
    except FileNotFoundError as e:
        raise click.UsageError(str(e))


@cli.command()
@click.option("--out", type=path_type, required=True)
@click.option("--seed", type=int, default=0)
@generator_options
@click.option("--omega", type=click.IntRange(min=1), default=None)
def generate(out, seed, omega, **gen):
    """write a generated instance as the four tables"""
    config = sim_config(None, dict(omega=omega))
    try:
        instance = generate_instance(generator_params(seed, gen), config)
    except InfeasibleParameters as e:
        raise click.UsageError(str(e))
    write_instance(instance, out)
    logging.info(
        f"wrote {len(instance.orders)} orders, {len(instance.fleet)} vehicles "
        f"and {len(instance.network.factories)} factories to {out}"
    )


@cli.command()
@click.option("--instance", "instance_dir", type=path_type, default=None)
@click.option("--instance-seed", type=int, default=0)
@generator_options
@click.option("--policy", "policy_name", type=click.Choice(policy_names), default=None)
@click.option("--external", "external_command", type=str, default=None)
@click.option("--persistent/--fresh", "external_persistent", default=None)
@click.option("--interaction-dir", type=path_type, default=None)
@click.option("--out", "output_dir", type=path_type, default=Path("./run"))
@click.option("--description", type=str, default=None)
@sim_options
def simulate(
    instance_dir,
    instance_seed,
    policy_name,
    external_command,
    external_persistent,
    interaction_dir,
    output_dir,
    description,
    config_path,
    **kwargs,
):
    """run one simulation, write the event log and the report, exit with the run status"""
    gen = split_generator_options(kwargs)
    config_file = config_file_or_none(config_path)
    if policy_name is not None and external_command is not None:
        raise click.UsageError("--policy and --external exclude each other")
    generator = None
    if instance_dir is None and (config_file is None or config_file.instance is None):
        generator = generator_params(instance_seed, gen)
    try:
        run = run_config_from_file(
            config_file,
            instance_dir=instance_dir,
            generator=generator,
            policy_name=policy_name,
            external_command=external_command,
            external_persistent=external_persistent,
            interaction_dir=interaction_dir,
            output_dir=output_dir,
            **sim_overrides(kwargs),
        )
        instance = load_instance(run)
        result = execute(run, instance)
    except (ConfigError, InfeasibleParameters) as e:
        raise click.UsageError(str(e))
    except (InstanceFormatError, FileNotFoundError) as e:
        raise click.UsageError(f"{run.instance_dir}: {e}")

    write_run_outputs(result, output_dir, description)
    logging.info(json.dumps(result.report.to_record()))
    sys.exit(exit_code(result.status))


@cli.command()
@click.option("--instance", "instance_dir", type=path_type, required=True)
@click.option("--interaction-dir", type=path_type, default=defaults.interaction_dir)
@sim_options
def validate(instance_dir, interaction_dir, config_path, **sim):
    """check the output documents of an algorithm against its input documents"""
    config = sim_config(config_path, sim)
    instance = read_instance_or_exit(instance_dir, config)
    try:
        snapshot = read_snapshot_json(interaction_dir, instance.network, config)
        plan = read_dispatch_files(interaction_dir, config)
    except InteractionError as e:
        logging.error(str(e))
        sys.exit(defaults.exit_protocol)

    violations = validate_dispatch(snapshot, plan)
    for violation in violations:
        logging.info(str(violation))
    if len(violations) > 0:
        sys.exit(defaults.exit_validation)
    logging.info("plan is valid")


@cli.command()
@click.option("--events", "events_file", type=path_type, required=True)
@click.option("--instance", "instance_dir", type=path_type, required=True)
@click.option("--report", "report_file", type=path_type, default=None)
@click.option("--status", type=str, default=None)
@click.option("--out", type=path_type, default=None)
@sim_options
def score(events_file, instance_dir, report_file, status, out, config_path, **sim):
    """recompute the objectives of an event log by replaying it"""
    lambda_weight = sim.pop("lambda_weight")
    config = sim_config(config_path, sim)
    instance = read_instance_or_exit(instance_dir, config)

    expected = None
    if report_file is not None:
        try:
            expected = read_report(report_file).report
        except (ConfigError, KeyError, ValueError) as e:
            raise click.UsageError(f"cannot read {report_file}: {e}")
        status = status or expected.status

    try:
        report = replay_score(read_event_log(events_file), instance, config, status or "finished")
    except (OracleFailure, EventLogFormatError) as e:
        logging.error(f"replay failed: {e}")
        sys.exit(defaults.exit_oracle_failure)

    if expected is not None:
        differences = compare_reports(report, expected)
        if len(differences) > 0:
            for difference in differences:
                logging.error(f"report mismatch, {difference}")
            sys.exit(defaults.exit_oracle_failure)

    if lambda_weight is not None:
        report = report.with_lambda(lambda_weight)
    if out is not None:
        write_report(out, {"format": report_format, "report": report.to_json_dict()})
    logging.info(json.dumps(report.to_json_dict(), indent=2))


@cli.command()
@click.option("--instance", "instance_dirs", type=path_type, multiple=True)
@click.option("--instance-seeds", type=str, default=None, help="eg, 1,2,3")
@generator_options
@click.option(
    "--policy",
    "policies",
    type=click.Choice(policy_names),
    multiple=True,
    default=("greedy", "threshold", "vns"),
)
@click.option("--out", type=path_type, default=Path("./bench.csv"))
@click.option("--timing/--no-timing", default=False)
@sim_options
def bench(instance_dirs, instance_seeds, policies, out, timing, config_path, **kwargs):
    """every instance with every policy, an aggregate csv with means per policy"""
    gen = split_generator_options(kwargs)
    config_file = config_file_or_none(config_path)
    config = sim_config(config_path, kwargs)

    instances = [
        BenchInstance(label=str(d), instance=read_instance_or_exit(d, config))
        for d in instance_dirs
    ]
    if instance_seeds is not None:
        try:
            seeds = [int(s) for s in instance_seeds.split(",") if s.strip() != ""]
        except ValueError:
            raise click.BadParameter(instance_seeds, param_hint="--instance-seeds")
        try:
            instances.extend(
                BenchInstance(
                    label=f"seed-{seed}",
                    instance=generate_instance(generator_params(seed, gen), config),
                )
                for seed in seeds
            )
        except InfeasibleParameters as e:
            raise click.UsageError(str(e))
    if len(instances) == 0:
        raise click.UsageError("no instances, use --instance or --instance-seeds")

    params = {}
    if config_file is not None and config_file.policy_name is not None:
        params[config_file.policy_name] = config_file.policy_params
    try:
        for name in policies:
            make_policy(name, params.get(name))
    except ConfigError as e:
        raise click.UsageError(str(e))

    rows = run_bench(instances, [BenchPolicy(name=p, params=params.get(p, {})) for p in policies])
    records = bench_records(rows, timing=timing)
    write_bench_csv(out, records)
    logging.info(format_bench_table(records))


@cli.command()
@click.option("--instance", "instance_dir", type=path_type, required=True)
@click.option("--policy", "policy_name", type=click.Choice(policy_names), default="greedy")
@click.option("--persistent/--fresh", default=False)
@click.option("--interaction-dir", type=path_type, default=defaults.interaction_dir)
@sim_options
def algorithm(instance_dir, policy_name, persistent, interaction_dir, config_path, **sim):
    """an embedded policy behind the file protocol, stdout only carries the success token"""
    logging.quiet = True
    config_file = config_file_or_none(config_path)
    config = sim_config(config_path, sim)
    instance = read_instance_or_exit(instance_dir, config)
    params = {}
    if config_file is not None and config_file.policy_name == policy_name:
        params = config_file.policy_params
    try:
        policy = make_policy(policy_name, params)
    except ConfigError as e:
        raise click.UsageError(str(e))

    try:
        if persistent:
            serve_rounds(interaction_dir, instance.network, config, policy)
        else:
            serve_round(interaction_dir, instance.network, config, policy)
    except InteractionError as e:
        logging.error(str(e))
        sys.exit(defaults.exit_protocol)


@cli.command()
@click.option("--out", type=path_type, default=Path("./dpdp.yaml"))
def init_config(out):
    """write a commented run config template, an existing file is kept"""
    maybe_create_config_file(out)
    logging.info(f"config at {out}")
