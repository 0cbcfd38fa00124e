"""the json documents exchanged with an algorithm each round
input, written by the simulator
    vehicle_info.json: list of vehicles
    unallocated_order_items.json and ongoing_order_items.json: list of items
output, written by the algorithm
    output_destination.json: {vehicle id: stop or null}
    output_route.json: {vehicle id: [stop, ...]}
times are unix timestamps, the horizon start plus seconds, 0 means unknown
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from dpdp import defaults
from dpdp.config import SimConfig
from dpdp.domain import ItemStatus, OrderItem, PalletType, RoadNetwork, from_quarters, to_quarters
from dpdp.plans import DispatchPlan, Stop
from dpdp.snapshots import Snapshot, VehicleView

vehicle_keys = {
    "id": str,
    "operation_time": int,
    "capacity": (int, float),
    "update_time": int,
    "cur_factory_id": str,
    "arrive_time_at_current_factory": int,
    "leave_time_at_current_factory": int,
    "carrying_items": list,
    "destination": (dict, type(None)),
}

item_keys = {
    "id": str,
    "type": str,
    "order_id": str,
    "demand": (int, float),
    "pickup_factory_id": str,
    "delivery_factory_id": str,
    "creation_time": int,
    "committed_completion_time": int,
    "load_time": int,
    "unload_time": int,
    "delivery_state": int,
}

stop_keys = {
    "factory_id": str,
    "lng": (int, float),
    "lat": (int, float),
    "delivery_item_list": list,
    "pickup_item_list": list,
    "arrive_time": int,
    "leave_time": int,
}


class InteractionError(Exception):
    pass


class UnknownId(InteractionError):
    pass


class MalformedStop(InteractionError):
    pass


class MissingDocument(InteractionError):
    pass


def to_unix(seconds: Optional[int], config: SimConfig) -> int:
    if seconds is None:
        return 0
    return config.horizon_epoch + seconds


def from_unix(timestamp: int, config: SimConfig) -> Optional[int]:
    if timestamp == 0:
        return None
    return timestamp - config.horizon_epoch


def _number(value: Fraction):
    if value.denominator == 1:
        return int(value)
    return float(value)


def stop_to_json_dict(stop: Stop, network: RoadNetwork, config: SimConfig) -> dict:
    factory = network.factories[stop.factory_id]
    return {
        "factory_id": stop.factory_id,
        "lng": factory.longitude,
        "lat": factory.latitude,
        "delivery_item_list": list(stop.delivery_item_ids),
        "pickup_item_list": list(stop.pickup_item_ids),
        "arrive_time": to_unix(stop.arrive_time, config),
        "leave_time": to_unix(stop.leave_time, config),
    }


def _check_keys(jd: Any, keys: dict, what: str) -> list[str]:
    if not isinstance(jd, dict):
        return [f"{what} is not an object"]
    problems = []
    for key, kind in keys.items():
        if key not in jd:
            problems.append(f"{what} misses {key}")
        elif not isinstance(jd[key], kind) or isinstance(jd[key], bool):
            problems.append(f"{what} has a bad {key}: {jd[key]!r}")
    return problems


def stop_from_json_dict(jd: Any, config: SimConfig) -> Stop:
    problems = _check_keys(jd, stop_keys, "stop")
    if len(problems) > 0:
        raise MalformedStop("; ".join(problems))
    for key in ("delivery_item_list", "pickup_item_list"):
        if not all(isinstance(i, str) for i in jd[key]):
            raise MalformedStop(f"{key} must only contain item ids")
    return Stop(
        factory_id=jd["factory_id"],
        pickup_item_ids=tuple(jd["pickup_item_list"]),
        delivery_item_ids=tuple(jd["delivery_item_list"]),
        arrive_time=from_unix(jd["arrive_time"], config),
        leave_time=from_unix(jd["leave_time"], config),
    )


def vehicle_to_json_dict(view: VehicleView, network: RoadNetwork, config: SimConfig) -> dict:
    return {
        "id": view.vehicle_id,
        "operation_time": view.operation_time,
        "capacity": _number(view.capacity),
        "update_time": to_unix(view.update_time, config),
        "cur_factory_id": view.cur_factory_id or "",
        "arrive_time_at_current_factory": to_unix(view.arrive_time, config),
        "leave_time_at_current_factory": to_unix(view.leave_time, config),
        "carrying_items": list(view.cargo),
        "destination": None
        if view.destination is None
        else stop_to_json_dict(view.destination, network, config),
    }


def vehicle_from_json_dict(jd: dict, config: SimConfig) -> VehicleView:
    return VehicleView(
        vehicle_id=jd["id"],
        capacity=Fraction(str(jd["capacity"])),
        operation_time=jd["operation_time"],
        update_time=from_unix(jd["update_time"], config),
        cur_factory_id=jd["cur_factory_id"] or None,
        arrive_time=from_unix(jd["arrive_time_at_current_factory"], config),
        leave_time=from_unix(jd["leave_time_at_current_factory"], config),
        cargo=tuple(jd["carrying_items"]),
        destination=None
        if jd["destination"] is None
        else stop_from_json_dict(jd["destination"], config),
    )


def item_to_json_dict(item: OrderItem, config: SimConfig) -> dict:
    # demand is the total of the order, the item itself follows from its type
    return {
        "id": item.id,
        "type": item.pallet_type.value,
        "order_id": item.order_id,
        "demand": float(from_quarters(item.order_quarters)),
        "pickup_factory_id": item.pickup_factory_id,
        "delivery_factory_id": item.delivery_factory_id,
        "creation_time": to_unix(item.creation_time, config),
        "committed_completion_time": to_unix(item.committed_completion_time, config),
        "load_time": item.load_time,
        "unload_time": item.unload_time,
        "delivery_state": int(item.status),
    }


def item_from_json_dict(jd: dict, config: SimConfig) -> OrderItem:
    try:
        pallet_type = PalletType(jd["type"])
        status = ItemStatus(jd["delivery_state"])
    except ValueError as e:
        raise InteractionError(f"item {jd.get('id')}: {e}")
    return OrderItem(
        id=jd["id"],
        order_id=jd["order_id"],
        pallet_type=pallet_type,
        pickup_factory_id=jd["pickup_factory_id"],
        delivery_factory_id=jd["delivery_factory_id"],
        creation_time=from_unix(jd["creation_time"], config),
        committed_completion_time=from_unix(jd["committed_completion_time"], config),
        load_time=jd["load_time"],
        unload_time=jd["unload_time"],
        order_quarters=to_quarters(jd["demand"]),
        status=status,
    )


def snapshot_documents(snapshot: Snapshot) -> dict[Path, Any]:
    network, config = snapshot.network, snapshot.config
    return {
        defaults.vehicle_info: [
            vehicle_to_json_dict(v, network, config) for v in snapshot.vehicles
        ],
        defaults.unallocated_order_items: [
            item_to_json_dict(i, config) for i in snapshot.unallocated
        ],
        defaults.ongoing_order_items: [item_to_json_dict(i, config) for i in snapshot.ongoing],
    }


def check_snapshot_documents(documents: dict[Path, Any]) -> list[str]:
    """schema problems of the input documents, empty when all is well"""
    problems = []
    vehicles = documents.get(defaults.vehicle_info)
    if not isinstance(vehicles, list):
        problems.append(f"{defaults.vehicle_info} is not a list")
        vehicles = []
    for index, jd in enumerate(vehicles):
        what = f"{defaults.vehicle_info}[{index}]"
        problems.extend(_check_keys(jd, vehicle_keys, what))
        if isinstance(jd, dict) and isinstance(jd.get("destination"), dict):
            problems.extend(_check_keys(jd["destination"], stop_keys, f"{what}.destination"))
    for name in (defaults.unallocated_order_items, defaults.ongoing_order_items):
        items = documents.get(name)
        if not isinstance(items, list):
            problems.append(f"{name} is not a list")
            continue
        for index, jd in enumerate(items):
            problems.extend(_check_keys(jd, item_keys, f"{name}[{index}]"))
    return problems


def _write_json(path: Path, content: Any):
    path.write_text(json.dumps(content, indent=2, ensure_ascii=False), encoding="utf-8")


def _read_json(path: Path) -> Any:
    if not path.exists():
        raise MissingDocument(f"{path.name} is missing")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InteractionError(f"{path.name} is not json: {e}")


def write_snapshot_json(snapshot: Snapshot, directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    for name, content in snapshot_documents(snapshot).items():
        _write_json(directory / name, content)


def read_snapshot_json(directory: Path, network: RoadNetwork, config: SimConfig) -> Snapshot:
    documents = {
        name: _read_json(directory / name)
        for name in (
            defaults.vehicle_info,
            defaults.unallocated_order_items,
            defaults.ongoing_order_items,
        )
    }
    problems = check_snapshot_documents(documents)
    if len(problems) > 0:
        raise InteractionError("; ".join(problems[:5]))

    vehicles = tuple(vehicle_from_json_dict(jd, config) for jd in documents[defaults.vehicle_info])
    if len(vehicles) == 0:
        raise InteractionError(f"{defaults.vehicle_info} has no vehicles")
    for view in vehicles:
        for factory_id in (view.cur_factory_id, view.destination and view.destination.factory_id):
            if factory_id is not None and factory_id not in network.factories:
                raise UnknownId(f"vehicle {view.vehicle_id} refers to unknown factory {factory_id}")
    return Snapshot(
        now=vehicles[0].update_time,
        vehicles=vehicles,
        unallocated=tuple(
            item_from_json_dict(jd, config) for jd in documents[defaults.unallocated_order_items]
        ),
        ongoing=tuple(
            item_from_json_dict(jd, config) for jd in documents[defaults.ongoing_order_items]
        ),
        network=network,
        config=config,
    )


def dispatch_documents(
    plan: DispatchPlan, network: RoadNetwork, config: SimConfig
) -> tuple[dict, dict]:
    destinations = {
        vehicle_id: None if stop is None else stop_to_json_dict(stop, network, config)
        for vehicle_id, stop in plan.destinations.items()
    }
    routes = {
        vehicle_id: [stop_to_json_dict(s, network, config) for s in plan.route(vehicle_id)]
        for vehicle_id in plan.vehicle_ids
    }
    return destinations, routes


def write_dispatch_json(plan: DispatchPlan, directory: Path, network: RoadNetwork, config: SimConfig):
    directory.mkdir(parents=True, exist_ok=True)
    destinations, routes = dispatch_documents(plan, network, config)
    _write_json(directory / defaults.output_destination, destinations)
    _write_json(directory / defaults.output_route, routes)


def read_dispatch_json(
    destination_doc: Any,
    route_doc: Any,
    config: SimConfig,
    known: Optional[Snapshot] = None,
) -> DispatchPlan:
    """the plan from the two output documents, ids are only checked against known if given"""
    for name, doc in (
        (defaults.output_destination, destination_doc),
        (defaults.output_route, route_doc),
    ):
        if not isinstance(doc, dict):
            raise InteractionError(f"{name} must map vehicle ids to stops")

    destinations = {}
    for vehicle_id, jd in destination_doc.items():
        destinations[vehicle_id] = None if jd is None else stop_from_json_dict(jd, config)
    routes = {}
    for vehicle_id, jd in route_doc.items():
        if not isinstance(jd, list):
            raise MalformedStop(f"route of {vehicle_id} is not a list")
        routes[vehicle_id] = tuple(stop_from_json_dict(s, config) for s in jd)
    plan = DispatchPlan(destinations=destinations, routes=routes)

    if known is not None:
        for vehicle_id in plan.vehicle_ids:
            if vehicle_id not in known.vehicle_by_id:
                raise UnknownId(f"unknown vehicle {vehicle_id}")
        for vehicle_id, index, stop in plan.all_stops():
            if stop.factory_id not in known.network.factories:
                raise UnknownId(f"unknown factory {stop.factory_id} for {vehicle_id}")
            for item_id in (*stop.pickup_item_ids, *stop.delivery_item_ids):
                if item_id not in known.items:
                    raise UnknownId(f"unknown item {item_id} for {vehicle_id}")
    return plan


def read_dispatch_files(
    directory: Path, config: SimConfig, known: Optional[Snapshot] = None
) -> DispatchPlan:
    return read_dispatch_json(
        _read_json(directory / defaults.output_destination),
        _read_json(directory / defaults.output_route),
        config,
        known,
    )


def clear_dispatch_files(directory: Path):
    for name in (defaults.output_destination, defaults.output_route):
        (directory / name).unlink(missing_ok=True)
