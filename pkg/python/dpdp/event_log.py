"""the event log format
json lines
file extension is jsonl, eg, events.jsonl
the first line is a header, eg, {"format": "dpdp-event-log-v1", "description": ...}
all other lines contain a single key "event"
event contains the keys
    time, kind, and any of vehicle, factory, destination, item, order, epoch
time is in seconds from the horizon start
the only format currently is "dpdp-event-log-v1"
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

log_format = "dpdp-event-log-v1"


class EventLogFormatError(Exception):
    pass


class EventKind(enum.Enum):
    ORDER_RELEASED = "ORDER_RELEASED"
    VEHICLE_ARRIVED = "VEHICLE_ARRIVED"
    DOCK_ALLOCATED = "DOCK_ALLOCATED"
    SERVICE_DONE = "SERVICE_DONE"
    VEHICLE_DEPARTED = "VEHICLE_DEPARTED"
    ITEM_LOADED = "ITEM_LOADED"
    ITEM_DELIVERED = "ITEM_DELIVERED"
    EPOCH_BOUNDARY = "EPOCH_BOUNDARY"


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: EventKind
    vehicle_id: Optional[str] = None
    factory_id: Optional[str] = None
    # only for departures
    destination_id: Optional[str] = None
    item_id: Optional[str] = None
    order_id: Optional[str] = None
    # only for epoch boundaries
    epoch: Optional[int] = None

    def to_json_dict(self) -> dict:
        jd = dict()
        jd["time"] = self.time
        jd["kind"] = self.kind.value
        if self.vehicle_id is not None:
            jd["vehicle"] = self.vehicle_id
        if self.factory_id is not None:
            jd["factory"] = self.factory_id
        if self.destination_id is not None:
            jd["destination"] = self.destination_id
        if self.item_id is not None:
            jd["item"] = self.item_id
        if self.order_id is not None:
            jd["order"] = self.order_id
        if self.epoch is not None:
            jd["epoch"] = self.epoch
        return jd

    @classmethod
    def from_json_dict(cls, jd: dict) -> SimEvent:
        jd = dict(jd)
        try:
            event = cls(
                time=int(jd.pop("time")),
                kind=EventKind(jd.pop("kind")),
                vehicle_id=jd.pop("vehicle", None),
                factory_id=jd.pop("factory", None),
                destination_id=jd.pop("destination", None),
                item_id=jd.pop("item", None),
                order_id=jd.pop("order", None),
                epoch=jd.pop("epoch", None),
            )
        except (KeyError, ValueError) as e:
            raise EventLogFormatError(f"bad event: {e}")
        if len(jd) > 0:
            raise EventLogFormatError(f"unexpected content left: {jd}")
        return event


def events_to_lines(
    events: Iterable[SimEvent], description: Optional[str] = None
) -> Iterable[str]:
    yield json.dumps({"format": log_format, "description": description})
    for event in events:
        yield json.dumps({"event": event.to_json_dict()})


def write_event_log(file: Path, events: Iterable[SimEvent], description: Optional[str] = None):
    file = file.expanduser()
    file.parent.mkdir(parents=True, exist_ok=True)
    with file.open("wt") as f:
        for line in events_to_lines(events, description):
            f.write(line + "\n")


def read_event_log(file: Path) -> list[SimEvent]:
    return list(parse_event_lines(file.expanduser().read_text().split("\n")))


def parse_event_lines(lines: Iterable[str]) -> Iterable[SimEvent]:
    file_format = None
    for number, line in enumerate(lines, start=1):
        if line.strip() == "":
            continue
        try:
            content = json.loads(line)
        except json.JSONDecodeError as e:
            raise EventLogFormatError(f"line {number} is not json: {e}")

        file_format = content.pop("format", file_format)
        if file_format != log_format:
            raise EventLogFormatError(f"line {number} has format {file_format!r}")

        content.pop("description", None)

        if "event" in content:
            yield SimEvent.from_json_dict(content.pop("event"))

        if len(content) > 0:
            raise EventLogFormatError(f"unexpected content left on line {number}: {content}")
