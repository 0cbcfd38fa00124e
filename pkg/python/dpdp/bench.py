from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from tabulate import tabulate

from dpdp import logging
from dpdp.instances import Instance
from dpdp.policies import make_policy
from dpdp.simulator import run_to_completion

mean_label = "MEAN"


@dataclass(frozen=True)
class BenchInstance:
    label: str
    instance: Instance


@dataclass(frozen=True)
class BenchPolicy:
    name: str
    params: dict[str, Any] = field(default_factory=dict)
    label: Optional[str] = None

    @property
    def display(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class BenchRow:
    instance: str
    policy: str
    status: str
    f1: float
    f2: float
    f: float
    orders_completed: int
    orders_total: int
    # wall clock seconds, not deterministic
    runtime: Optional[float] = None

    def to_record(self, timing: bool) -> dict:
        record = {
            "instance": self.instance,
            "policy": self.policy,
            "status": self.status,
            "f1": self.f1,
            "f2": self.f2,
            "f": self.f,
            "orders_completed": self.orders_completed,
            "orders_total": self.orders_total,
        }
        if timing:
            record["runtime"] = self.runtime
        return record


def run_bench(
    instances: list[BenchInstance],
    policies: list[BenchPolicy],
    clock: Callable[[], float] = time.monotonic,
) -> list[BenchRow]:
    """every instance with every policy, rows ordered by instance then policy"""
    labels = [p.display for p in policies]
    assert len(set(labels)) == len(labels), labels
    rows = []
    for bench_instance in instances:
        for bench_policy in policies:
            logging.debug(f"bench {bench_instance.label} with {bench_policy.display}")
            started = clock()
            result = run_to_completion(
                bench_instance.instance, make_policy(bench_policy.name, bench_policy.params)
            )
            runtime = clock() - started
            report = result.report
            rows.append(
                BenchRow(
                    instance=bench_instance.label,
                    policy=bench_policy.display,
                    status=report.status,
                    f1=report.f1,
                    f2=report.f2,
                    f=report.f,
                    orders_completed=report.orders_completed,
                    orders_total=report.orders_total,
                    runtime=runtime,
                )
            )
    return rows


def mean_rows(rows: list[BenchRow]) -> list[BenchRow]:
    """one row per policy, in order of first appearance"""
    by_policy: dict[str, list[BenchRow]] = {}
    for row in rows:
        by_policy.setdefault(row.policy, []).append(row)
    means = []
    for policy, group in by_policy.items():
        finished = sum(r.status == "finished" for r in group)
        runtimes = [r.runtime for r in group if r.runtime is not None]
        means.append(
            BenchRow(
                instance=mean_label,
                policy=policy,
                status=f"{finished}/{len(group)} finished",
                f1=math.fsum(r.f1 for r in group) / len(group),
                f2=math.fsum(r.f2 for r in group) / len(group),
                f=math.fsum(r.f for r in group) / len(group),
                orders_completed=sum(r.orders_completed for r in group),
                orders_total=sum(r.orders_total for r in group),
                runtime=math.fsum(runtimes) / len(runtimes) if len(runtimes) > 0 else None,
            )
        )
    return means


def bench_records(rows: list[BenchRow], timing: bool = False) -> list[dict]:
    return [r.to_record(timing) for r in rows + mean_rows(rows)]


def format_bench_csv(records: list[dict]) -> str:
    assert len(records) > 0
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=list(records[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    return out.getvalue()


def write_bench_csv(file: Path, records: list[dict]):
    file = file.expanduser()
    file.parent.mkdir(parents=True, exist_ok=True)
    file.write_text(format_bench_csv(records))


def format_bench_table(records: list[dict]) -> str:
    return tabulate(records, headers="keys", floatfmt=".2f")
