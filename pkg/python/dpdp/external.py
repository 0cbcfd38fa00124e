"""the process protocol
each round the simulator writes the input documents to the interaction dir and starts the
algorithm, which writes the output documents and prints SUCCESS on its own line to stdout
a persistent algorithm is started once and gets a line ROUND on stdin for every round
"""

from __future__ import annotations

import os
import queue
import shlex
import subprocess as S
import sys
import threading
import time
from pathlib import Path
from typing import Optional, Sequence, TextIO, Union

from dpdp import defaults, logging
from dpdp.config import SimConfig
from dpdp.domain import RoadNetwork
from dpdp.interaction import (
    InteractionError,
    check_snapshot_documents,
    clear_dispatch_files,
    read_dispatch_files,
    read_snapshot_json,
    snapshot_documents,
    write_dispatch_json,
    write_snapshot_json,
)
from dpdp.plans import DispatchPlan
from dpdp.policies import DispatchPolicy, PolicyProtocolError, PolicyTimeout
from dpdp.snapshots import Snapshot

round_request = "ROUND"

Command = Union[str, Sequence[str]]


class ExternalTimeout(PolicyTimeout):
    pass


class ProtocolError(PolicyProtocolError):
    pass


def _args(command: Command) -> list[str]:
    if isinstance(command, str):
        return shlex.split(command)
    return list(command)


def _pump(stream: TextIO, lines: queue.Queue):
    for line in iter(stream.readline, ""):
        lines.put(line.rstrip("\r\n"))
    # end of output, the process is gone or closed stdout
    lines.put(None)


class _Process:
    """a running algorithm whose stdout is read by a thread"""

    def __init__(self, command: Command, directory: Path, persistent: bool):
        env = dict(os.environ)
        env["DPDP_INTERACTION_DIR"] = str(directory)
        self.command = command
        self.popen = S.Popen(
            args=_args(command),
            stdin=S.PIPE if persistent else S.DEVNULL,
            stdout=S.PIPE,
            text=True,
            env=env,
        )
        self.lines: queue.Queue = queue.Queue()
        self.thread = threading.Thread(
            target=_pump, args=(self.popen.stdout, self.lines), daemon=True
        )
        self.thread.start()

    def wait_for_token(self, limit: float):
        """token, deadline and exit race, the first one decides"""
        deadline = time.monotonic() + limit
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ExternalTimeout(f"no {defaults.success_token} within {limit}s")
            try:
                line = self.lines.get(timeout=remaining)
            except queue.Empty:
                raise ExternalTimeout(f"no {defaults.success_token} within {limit}s")
            if line is None:
                returncode = self.popen.wait()
                raise ProtocolError(
                    f"algorithm exited with {returncode} without printing {defaults.success_token}"
                )
            if line.strip() == defaults.success_token:
                return
            logging.debug(f"algorithm: {line}")

    def request_round(self):
        try:
            self.popen.stdin.write(round_request + "\n")
            self.popen.stdin.flush()
        except (BrokenPipeError, ConnectionError):
            raise ProtocolError(f"algorithm exited with {self.popen.poll()}")

    def stop(self, grace: float = 1.0):
        if self.popen.stdin is not None:
            try:
                self.popen.stdin.close()
            except (BrokenPipeError, ConnectionError):
                pass
        try:
            self.popen.wait(timeout=grace)
        except S.TimeoutExpired:
            self.popen.terminate()
            try:
                self.popen.wait(timeout=grace)
            except S.TimeoutExpired:
                self.popen.kill()
                self.popen.wait()
        self.thread.join(timeout=grace)


def _prepare_round(directory: Path, snapshot: Snapshot):
    problems = check_snapshot_documents(snapshot_documents(snapshot))
    assert len(problems) == 0, problems
    write_snapshot_json(snapshot, directory)
    clear_dispatch_files(directory)


def _read_plan(directory: Path, config: SimConfig) -> DispatchPlan:
    try:
        return read_dispatch_files(directory, config)
    except InteractionError as e:
        raise ProtocolError(str(e))


def run_external_round(
    directory: Path, command: Command, limit: float, snapshot: Snapshot
) -> DispatchPlan:
    """one round with a fresh algorithm process"""
    directory = directory.expanduser()
    _prepare_round(directory, snapshot)
    process = _Process(command, directory, persistent=False)
    try:
        process.wait_for_token(limit)
    finally:
        process.stop()
    return _read_plan(directory, snapshot.config)


class ExternalPolicy(DispatchPolicy):
    name = "external"

    def __init__(self, command: Command, directory: Path, limit: float, persistent: bool = False):
        self.command = command
        self.directory = directory.expanduser()
        self.limit = limit
        self.persistent = persistent
        self._process: Optional[_Process] = None

    def decide(self, snapshot: Snapshot) -> DispatchPlan:
        if not self.persistent:
            return run_external_round(self.directory, self.command, self.limit, snapshot)
        _prepare_round(self.directory, snapshot)
        if self._process is None:
            self._process = _Process(self.command, self.directory, persistent=True)
        self._process.request_round()
        try:
            self._process.wait_for_token(self.limit)
        except PolicyTimeout:
            self.close()
            raise
        return _read_plan(self.directory, snapshot.config)

    def close(self):
        if self._process is not None:
            self._process.stop()
            self._process = None


def serve_round(
    directory: Path,
    network: RoadNetwork,
    config: SimConfig,
    policy: DispatchPolicy,
    out: TextIO = sys.stdout,
):
    """the algorithm side of one round"""
    snapshot = read_snapshot_json(directory, network, config)
    plan = policy.decide(snapshot)
    write_dispatch_json(plan, directory, network, config)
    print(defaults.success_token, file=out, flush=True)


def serve_rounds(
    directory: Path,
    network: RoadNetwork,
    config: SimConfig,
    policy: DispatchPolicy,
    requests: TextIO = sys.stdin,
    out: TextIO = sys.stdout,
):
    """the algorithm side of a persistent process, one round per request line"""
    for line in requests:
        if line.strip() != round_request:
            logging.warning(f"ignoring unexpected request {line.strip()!r}")
            continue
        serve_round(directory, network, config, policy, out)
