from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from dpdp.domain import split_verdict
from dpdp.plans import DispatchPlan, Stop
from dpdp.snapshots import Snapshot, VehicleMode, VehicleView


class ViolationCode(enum.Enum):
    DESTINATION_LOCKED = "DESTINATION_LOCKED"
    LIST_COMMITTED = "LIST_COMMITTED"
    CAPACITY_EXCEEDED = "CAPACITY_EXCEEDED"
    LIFO_VIOLATION = "LIFO_VIOLATION"
    ILLEGAL_SPLIT = "ILLEGAL_SPLIT"
    UNKNOWN_ID = "UNKNOWN_ID"
    DUPLICATE_ITEM = "DUPLICATE_ITEM"
    ORPHANED_ITEM = "ORPHANED_ITEM"
    MALFORMED_ROUTE = "MALFORMED_ROUTE"


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    # eg, "vehicle V_1 stop 2" or "order 0000000007"
    locus: str
    message: str

    def to_json_dict(self) -> dict:
        return dict(code=self.code.value, locus=self.locus, message=self.message)

    @classmethod
    def from_json_dict(cls, jd: dict) -> Violation:
        return cls(code=ViolationCode(jd["code"]), locus=jd["locus"], message=jd["message"])

    def __str__(self):
        return f"{self.code.value} at {self.locus}: {self.message}"


class PlanRejected(Exception):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations[:3]))


def _stop_locus(vehicle_id: str, index: int) -> str:
    return f"vehicle {vehicle_id} stop {index}"


def walk_stops(
    vehicle_id: str,
    stack: Sequence[str],
    stops: Sequence[Stop],
    quarters: Mapping[str, int],
    capacity_quarters: int,
) -> list[Violation]:
    """simulate the cargo stack over the stops, unloads before loads at every stop"""
    violations = []
    stack = list(stack)
    load = sum(quarters[i] for i in stack)
    picked = set()
    delivered = set()
    for index, stop in enumerate(stops):
        locus = _stop_locus(vehicle_id, index)
        for item_id in stop.delivery_item_ids:
            delivered.add(item_id)
            if item_id not in stack:
                violations.append(
                    Violation(
                        ViolationCode.ORPHANED_ITEM,
                        locus,
                        f"{item_id} is delivered but neither on board nor picked up before",
                    )
                )
                continue
            if stack[-1] != item_id:
                violations.append(
                    Violation(
                        ViolationCode.LIFO_VIOLATION,
                        locus,
                        f"{item_id} is not on top of the stack, {stack[-1]} is",
                    )
                )
            stack.remove(item_id)
            load -= quarters[item_id]
        for item_id in stop.pickup_item_ids:
            picked.add(item_id)
            stack.append(item_id)
            load += quarters[item_id]
        if load > capacity_quarters:
            violations.append(
                Violation(
                    ViolationCode.CAPACITY_EXCEEDED,
                    locus,
                    f"load of {load / 4} exceeds the capacity of {capacity_quarters / 4}",
                )
            )
    for item_id in sorted(picked - delivered):
        violations.append(
            Violation(
                ViolationCode.ORPHANED_ITEM,
                f"vehicle {vehicle_id}",
                f"{item_id} is picked up but never delivered",
            )
        )
    return violations


def effective_stops(view: VehicleView, plan: DispatchPlan) -> Optional[list[Stop]]:
    """the stops still to be served, None when the committed stop is not echoed"""
    stops = plan.stops(view.vehicle_id)
    committed = view.committed_stop
    if committed is None:
        return stops
    if len(stops) == 0 or not committed.same_manifest(stops[0]):
        return None
    return [view.remaining_committed(), *stops[1:]]


def _is_echo(snapshot: Snapshot, vehicle_id: str, index: int) -> bool:
    view = snapshot.vehicle_by_id.get(vehicle_id)
    return index == 0 and view is not None and view.mode is VehicleMode.AT_FACTORY


def _resolve_ids(snapshot: Snapshot, plan: DispatchPlan) -> list[Violation]:
    violations = []
    for vehicle_id in plan.vehicle_ids:
        if vehicle_id not in snapshot.vehicle_by_id:
            violations.append(
                Violation(ViolationCode.UNKNOWN_ID, f"vehicle {vehicle_id}", "unknown vehicle")
            )
    for vehicle_id, index, stop in plan.all_stops():
        locus = _stop_locus(vehicle_id, index)
        if stop.factory_id not in snapshot.network.factories:
            violations.append(
                Violation(ViolationCode.UNKNOWN_ID, locus, f"unknown factory {stop.factory_id}")
            )
        known = snapshot.items
        if _is_echo(snapshot, vehicle_id, index):
            # the committed stop still lists what it has already unloaded
            committed = snapshot.vehicle_by_id[vehicle_id].destination
            known = {*known, *committed.pickup_item_ids, *committed.delivery_item_ids}
        for item_id in (*stop.pickup_item_ids, *stop.delivery_item_ids):
            if item_id not in known:
                violations.append(
                    Violation(ViolationCode.UNKNOWN_ID, locus, f"unknown or delivered item {item_id}")
                )
    return violations


def _check_route_shape(snapshot: Snapshot, plan: DispatchPlan) -> list[Violation]:
    violations = []
    for vehicle_id in plan.vehicle_ids:
        if plan.destination(vehicle_id) is None and len(plan.route(vehicle_id)) > 0:
            violations.append(
                Violation(
                    ViolationCode.MALFORMED_ROUTE,
                    f"vehicle {vehicle_id}",
                    "route without a destination",
                )
            )
    for vehicle_id, index, stop in plan.all_stops():
        if _is_echo(snapshot, vehicle_id, index):
            # compared as a whole with the committed stop
            continue
        locus = _stop_locus(vehicle_id, index)
        for item_id in stop.pickup_item_ids:
            item = snapshot.items[item_id]
            if item.pickup_factory_id != stop.factory_id:
                violations.append(
                    Violation(
                        ViolationCode.MALFORMED_ROUTE,
                        locus,
                        f"{item_id} is picked up at {stop.factory_id}, "
                        f"not at {item.pickup_factory_id}",
                    )
                )
        for item_id in stop.delivery_item_ids:
            item = snapshot.items[item_id]
            if item.delivery_factory_id != stop.factory_id:
                violations.append(
                    Violation(
                        ViolationCode.MALFORMED_ROUTE,
                        locus,
                        f"{item_id} is delivered at {stop.factory_id}, "
                        f"not at {item.delivery_factory_id}",
                    )
                )
    return violations


def _check_commitments(snapshot: Snapshot, plan: DispatchPlan) -> list[Violation]:
    violations = []
    committed_pickups = {}
    committed_deliveries = {}
    for view in snapshot.vehicles:
        vehicle_id = view.vehicle_id
        destination = plan.destination(vehicle_id)
        if view.mode is VehicleMode.IN_TRANSIT:
            if destination is None or destination.factory_id != view.destination.factory_id:
                violations.append(
                    Violation(
                        ViolationCode.DESTINATION_LOCKED,
                        f"vehicle {vehicle_id}",
                        f"the destination {view.destination.factory_id} is locked, got "
                        f"{None if destination is None else destination.factory_id}",
                    )
                )
        elif view.mode is VehicleMode.AT_FACTORY:
            if not view.destination.same_manifest(destination):
                violations.append(
                    Violation(
                        ViolationCode.LIST_COMMITTED,
                        f"vehicle {vehicle_id}",
                        f"the committed stop at {view.destination.factory_id} must be echoed unchanged",
                    )
                )
            committed_pickups.update((i, vehicle_id) for i in view.destination.pickup_item_ids)
            committed_deliveries.update(
                (i, vehicle_id) for i in view.destination.delivery_item_ids
            )

    for vehicle_id, index, stop in plan.all_stops():
        if _is_echo(snapshot, vehicle_id, index):
            continue
        for item_id in stop.pickup_item_ids:
            if item_id in committed_pickups:
                violations.append(
                    Violation(
                        ViolationCode.LIST_COMMITTED,
                        _stop_locus(vehicle_id, index),
                        f"{item_id} is on the committed pickup list of "
                        f"{committed_pickups[item_id]}",
                    )
                )
        for item_id in stop.delivery_item_ids:
            if item_id in committed_deliveries:
                violations.append(
                    Violation(
                        ViolationCode.LIST_COMMITTED,
                        _stop_locus(vehicle_id, index),
                        f"{item_id} is on the committed delivery list of "
                        f"{committed_deliveries[item_id]}",
                    )
                )
    return violations


def _check_duplicates(
    snapshot: Snapshot, stops_by_vehicle: dict[str, list[Stop]]
) -> list[Violation]:
    violations = []
    pickups = Counter()
    deliveries = Counter()
    for stops in stops_by_vehicle.values():
        for stop in stops:
            pickups.update(stop.pickup_item_ids)
            deliveries.update(stop.delivery_item_ids)
    on_board = {i: v.vehicle_id for v in snapshot.vehicles for i in v.cargo}
    for item_id, count in sorted(pickups.items()):
        if count > 1:
            violations.append(
                Violation(ViolationCode.DUPLICATE_ITEM, f"item {item_id}", f"picked up {count} times")
            )
        if item_id in on_board:
            violations.append(
                Violation(
                    ViolationCode.DUPLICATE_ITEM,
                    f"item {item_id}",
                    f"picked up but already on board of {on_board[item_id]}",
                )
            )
    for item_id, count in sorted(deliveries.items()):
        if count > 1:
            violations.append(
                Violation(ViolationCode.DUPLICATE_ITEM, f"item {item_id}", f"delivered {count} times")
            )
    return violations


def _check_splits(snapshot: Snapshot, plan: DispatchPlan) -> list[Violation]:
    # every item of an order belongs to one load group: a vehicle's cargo, a planned pickup
    # stop of a vehicle, or nothing yet
    group_of = {}
    for view in snapshot.vehicles:
        for item_id in view.cargo:
            group_of[item_id] = (view.vehicle_id, -1)
    for vehicle_id, index, stop in plan.all_stops():
        for item_id in stop.pickup_item_ids:
            group_of[item_id] = (vehicle_id, index)

    groups_by_order = {}
    order_quarters_by_id = {}
    for item in snapshot.items.values():
        order_quarters_by_id[item.order_id] = item.order_quarters
        group = group_of.get(item.id, None)
        parts = groups_by_order.setdefault(item.order_id, {})
        parts[group] = parts.get(group, 0) + item.quarters

    capacity = snapshot.fleet_capacity_quarters
    violations = []
    for order_id, parts in sorted(groups_by_order.items()):
        order_quarters = order_quarters_by_id[order_id]
        if order_quarters <= capacity:
            if len(parts) > 1:
                violations.append(
                    Violation(
                        ViolationCode.ILLEGAL_SPLIT,
                        f"order {order_id}",
                        f"the order fits into one vehicle but is spread over {len(parts)} parts",
                    )
                )
            continue
        assigned = [q for group, q in sorted(parts.items(), key=str) if group is not None]
        if len(assigned) == 0:
            continue
        verdict = split_verdict(order_quarters, capacity, assigned)
        if not verdict.legal:
            violations.append(
                Violation(ViolationCode.ILLEGAL_SPLIT, f"order {order_id}", verdict.value)
            )
    return violations


def validate_dispatch(snapshot: Snapshot, plan: DispatchPlan) -> list[Violation]:
    """all violations of the plan against the snapshot, an empty list means the plan is ok"""
    violations = _resolve_ids(snapshot, plan)
    if len(violations) > 0:
        # further checks need resolved ids
        return violations

    violations.extend(_check_route_shape(snapshot, plan))
    violations.extend(_check_commitments(snapshot, plan))

    stops_by_vehicle = {}
    for view in snapshot.vehicles:
        stops = effective_stops(view, plan)
        if stops is not None:
            stops_by_vehicle[view.vehicle_id] = stops

    quarters = {item_id: item.quarters for item_id, item in snapshot.items.items()}
    for view in snapshot.vehicles:
        stops = stops_by_vehicle.get(view.vehicle_id)
        if stops is None:
            continue
        violations.extend(
            walk_stops(view.vehicle_id, view.cargo, stops, quarters, view.capacity_quarters)
        )

    violations.extend(_check_splits(snapshot, plan))
    violations.extend(_check_duplicates(snapshot, stops_by_vehicle))
    return violations


def ensure_valid(snapshot: Snapshot, plan: DispatchPlan):
    violations = validate_dispatch(snapshot, plan)
    if len(violations) > 0:
        raise PlanRejected(violations)
