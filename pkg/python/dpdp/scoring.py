"""objectives
f1 is the total timeout over orders in seconds, sum of max(0, completion - committed)
f2 is the average distance over all vehicles in km, vehicles that never move count with 0
f = lambda * f1 + f2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, Optional, Sequence

from dpdp.config import CompletionSemantics, SimConfig
from dpdp.domain import ItemStatus, explode_order, to_quarters
from dpdp.event_log import EventKind, SimEvent
from dpdp.utils import ffield


class OracleFailure(Exception):
    pass


@dataclass(frozen=True)
class ScoreReport:
    f1: int
    f2: float
    lambda_weight: float
    f: float
    order_timeouts: dict[str, int]
    vehicle_distances: dict[str, float]
    orders_completed: int
    orders_total: int
    complete: bool
    status: str = "finished"

    @classmethod
    def build(
        cls,
        order_timeouts: dict[str, int],
        vehicle_distances: dict[str, float],
        lambda_weight: float,
        orders_total: int,
        status: str,
    ) -> ScoreReport:
        f1 = sum(order_timeouts.values())
        f2 = math.fsum(vehicle_distances.values()) / len(vehicle_distances)
        return cls(
            f1=f1,
            f2=f2,
            lambda_weight=lambda_weight,
            f=lambda_weight * f1 + f2,
            order_timeouts=dict(sorted(order_timeouts.items())),
            vehicle_distances=dict(vehicle_distances),
            orders_completed=len(order_timeouts),
            orders_total=orders_total,
            complete=status == "finished" and len(order_timeouts) == orders_total,
            status=status,
        )

    def with_lambda(self, lambda_weight: float) -> ScoreReport:
        return ScoreReport.build(
            self.order_timeouts,
            self.vehicle_distances,
            lambda_weight,
            self.orders_total,
            self.status,
        )

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "complete": self.complete,
            "f1": self.f1,
            "f2": self.f2,
            "lambda": self.lambda_weight,
            "f": self.f,
            "orders_completed": self.orders_completed,
            "orders_total": self.orders_total,
            "order_timeouts": self.order_timeouts,
            "vehicle_distances": self.vehicle_distances,
        }

    @classmethod
    def from_json_dict(cls, jd: dict) -> ScoreReport:
        return cls(
            f1=int(jd["f1"]),
            f2=float(jd["f2"]),
            lambda_weight=jd["lambda"],
            f=float(jd["f"]),
            order_timeouts={k: int(v) for k, v in jd["order_timeouts"].items()},
            vehicle_distances={k: float(v) for k, v in jd["vehicle_distances"].items()},
            orders_completed=int(jd["orders_completed"]),
            orders_total=int(jd["orders_total"]),
            complete=bool(jd["complete"]),
            status=jd["status"],
        )

    def to_record(self) -> dict:
        """flat metrics, eg, for a csv row"""
        return {
            "status": self.status,
            "f1": self.f1,
            "f2": self.f2,
            "f": self.f,
            "orders_completed": self.orders_completed,
            "orders_total": self.orders_total,
        }


def compare_reports(a: ScoreReport, b: ScoreReport) -> list[str]:
    return [
        f"{f.name}: {getattr(a, f.name)!r} != {getattr(b, f.name)!r}"
        for f in fields(ScoreReport)
        if getattr(a, f.name) != getattr(b, f.name)
    ]


def _item_counts(instance) -> dict[str, int]:
    return {order.id: len(order.quantity.pallet_types()) for order in instance.orders}


def score(
    events: Sequence[SimEvent],
    instance,
    config: Optional[SimConfig] = None,
    status: str = "finished",
) -> ScoreReport:
    """objectives straight from the event log, incomplete runs only count completed orders"""
    config = config or instance.config
    network = instance.network

    distances = {v.id: [] for v in instance.fleet}
    arrivals = {}
    completion = {}
    delivered = {}
    for event in events:
        if event.kind is EventKind.VEHICLE_DEPARTED:
            distances[event.vehicle_id].append(
                network.distance(event.factory_id, event.destination_id)
            )
        elif event.kind is EventKind.VEHICLE_ARRIVED:
            arrivals[event.vehicle_id] = event.time
        elif event.kind is EventKind.ITEM_DELIVERED:
            if config.completion_semantics is CompletionSemantics.ARRIVAL:
                t = arrivals[event.vehicle_id]
            else:
                t = event.time
            completion[event.order_id] = max(completion.get(event.order_id, t), t)
            delivered[event.order_id] = delivered.get(event.order_id, 0) + 1

    item_counts = _item_counts(instance)
    timeouts = {}
    for order in instance.orders:
        if delivered.get(order.id, 0) == item_counts[order.id]:
            timeouts[order.id] = max(0, completion[order.id] - order.committed_completion_time)

    return ScoreReport.build(
        order_timeouts=timeouts,
        vehicle_distances={v: math.fsum(d) for v, d in distances.items()},
        lambda_weight=config.lambda_weight,
        orders_total=len(instance.orders),
        status=status,
    )


@dataclass
class _ShadowVehicle:
    factory_id: Optional[str] = None
    # set while driving
    origin_id: Optional[str] = None
    destination_id: Optional[str] = None
    departure_time: Optional[int] = None
    docked_at: Optional[int] = None
    work: int = 0
    last_arrival: Optional[int] = None
    stack: list[str] = ffield(list)
    distance: list[float] = ffield(list)


def replay_score(
    events: Iterable[SimEvent],
    instance,
    config: Optional[SimConfig] = None,
    status: str = "finished",
) -> ScoreReport:
    """recompute the objectives by replaying the log against shadow state

    raises OracleFailure when the log breaks any rule of the simulation
    """
    config = config or instance.config
    network = instance.network
    orders = instance.order_by_id
    items = {i.id: i for order in instance.orders for i in explode_order(order, config.omega)}
    capacity = {v.id: to_quarters(v.capacity) for v in instance.fleet}

    vehicles = {v.id: _ShadowVehicle() for v in instance.fleet}
    docks_in_use = {f: 0 for f in network.factories}
    released = set()
    item_status = {i: ItemStatus.GENERATED for i in items}
    done_by_order = {}
    last_done = {}
    previous = None

    def fail(event, message):
        raise OracleFailure(f"{event.kind.value} at {event.time}: {message}")

    for event in events:
        if previous is not None and event.time < previous:
            fail(event, f"time goes backwards from {previous}")
        previous = event.time
        kind = event.kind

        if kind is EventKind.ORDER_RELEASED:
            order = orders.get(event.order_id)
            if order is None or event.order_id in released:
                fail(event, f"bad release of {event.order_id}")
            if event.time != order.creation_time:
                fail(event, f"{order.id} is created at {order.creation_time}")
            released.add(order.id)
            continue

        if kind is EventKind.EPOCH_BOUNDARY:
            continue

        vehicle = vehicles.get(event.vehicle_id)
        if vehicle is None:
            fail(event, f"unknown vehicle {event.vehicle_id}")

        if kind is EventKind.VEHICLE_ARRIVED:
            if vehicle.factory_id is None and vehicle.destination_id is None:
                if event.time != 0:
                    fail(event, "initial placement after the start")
            else:
                if vehicle.destination_id != event.factory_id:
                    fail(event, f"{event.vehicle_id} was not driving to {event.factory_id}")
                expected = vehicle.departure_time + network.travel_time(
                    vehicle.origin_id, vehicle.destination_id
                )
                if event.time != expected:
                    fail(event, f"arrival expected at {expected}")
            vehicle.factory_id = event.factory_id
            vehicle.origin_id = vehicle.destination_id = vehicle.departure_time = None
            vehicle.last_arrival = event.time

        elif kind is EventKind.VEHICLE_DEPARTED:
            if vehicle.factory_id != event.factory_id or vehicle.docked_at is not None:
                fail(event, f"{event.vehicle_id} cannot leave {event.factory_id}")
            vehicle.distance.append(network.distance(event.factory_id, event.destination_id))
            vehicle.origin_id = event.factory_id
            vehicle.destination_id = event.destination_id
            vehicle.departure_time = event.time
            vehicle.factory_id = None

        elif kind is EventKind.DOCK_ALLOCATED:
            if vehicle.factory_id != event.factory_id or vehicle.docked_at is not None:
                fail(event, f"{event.vehicle_id} cannot dock at {event.factory_id}")
            docks_in_use[event.factory_id] += 1
            if docks_in_use[event.factory_id] > network.dock_count(event.factory_id):
                fail(event, f"more vehicles than docks at {event.factory_id}")
            vehicle.docked_at = event.time
            vehicle.work = 0

        elif kind is EventKind.SERVICE_DONE:
            if vehicle.docked_at is None or vehicle.factory_id != event.factory_id:
                fail(event, f"{event.vehicle_id} is not docked at {event.factory_id}")
            # loading and unloading fits in one work shift when any shift is long enough
            begin = config.service_start(vehicle.docked_at + config.dock_approach_time, vehicle.work)
            if event.time != begin + vehicle.work:
                fail(event, f"service of {event.vehicle_id} should end at {begin + vehicle.work}")
            docks_in_use[event.factory_id] -= 1
            vehicle.docked_at = None

        elif kind is EventKind.ITEM_LOADED:
            item = items.get(event.item_id)
            if item is None or item.order_id not in released:
                fail(event, f"{event.item_id} is not released")
            if vehicle.docked_at is None or item.pickup_factory_id != vehicle.factory_id:
                fail(event, f"{item.id} is not loaded at its pickup factory")
            if item_status[item.id] is not ItemStatus.GENERATED:
                fail(event, f"{item.id} is loaded with status {item_status[item.id]}")
            item_status[item.id] = ItemStatus.LOADED
            vehicle.stack.append(item.id)
            vehicle.work += item.load_time
            if sum(items[i].quarters for i in vehicle.stack) > capacity[event.vehicle_id]:
                fail(event, f"{event.vehicle_id} is over capacity")

        elif kind is EventKind.ITEM_DELIVERED:
            item = items.get(event.item_id)
            if item is None or item_status[item.id] is not ItemStatus.LOADED:
                fail(event, f"{event.item_id} is delivered without being loaded")
            if vehicle.docked_at is None or item.delivery_factory_id != vehicle.factory_id:
                fail(event, f"{item.id} is not delivered at its delivery factory")
            if len(vehicle.stack) == 0 or vehicle.stack[-1] != item.id:
                fail(event, f"{item.id} is not on top of the stack of {event.vehicle_id}")
            vehicle.stack.pop()
            item_status[item.id] = ItemStatus.DELIVERED
            vehicle.work += item.unload_time
            if config.completion_semantics is CompletionSemantics.ARRIVAL:
                done = vehicle.last_arrival
            else:
                done = event.time
            done_by_order[item.order_id] = done_by_order.get(item.order_id, 0) + 1
            last_done[item.order_id] = max(last_done.get(item.order_id, done), done)

        else:
            fail(event, "unexpected event")

    if status == "finished":
        open_items = [i for i, s in item_status.items() if s is not ItemStatus.DELIVERED]
        if len(open_items) > 0:
            raise OracleFailure(f"finished with {len(open_items)} undelivered items")

    timeouts = {}
    for order in instance.orders:
        if done_by_order.get(order.id, 0) == len(order.quantity.pallet_types()):
            timeouts[order.id] = max(0, last_done[order.id] - order.committed_completion_time)

    return ScoreReport.build(
        order_timeouts=timeouts,
        vehicle_distances={v: math.fsum(s.distance) for v, s in vehicles.items()},
        lambda_weight=config.lambda_weight,
        orders_total=len(instance.orders),
        status=status,
    )
