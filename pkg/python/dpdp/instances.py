from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

from dpdp import defaults
from dpdp.config import SimConfig
from dpdp.domain import (
    DomainError,
    Edge,
    Factory,
    IncompleteGraph,
    Order,
    PalletQuantity,
    RoadNetwork,
    Vehicle,
    explode_order,
    format_demand,
    to_quarters,
)
from dpdp.utils import format_clock, parse_clock

order_columns = [
    "order_id",
    "q_standard",
    "q_small",
    "q_box",
    "demand",
    "creation_time",
    "committed_completion_time",
    "load_time",
    "unload_time",
    "pickup_id",
    "delivery_id",
]
vehicle_columns = ["car_num", "capacity", "operation_time", "gps_id"]
route_columns = ["route_code", "start_factory_id", "end_factory_id", "distance", "time"]
factory_columns = ["factory_id", "longitude", "latitude", "port_num"]


class InstanceFormatError(Exception):
    def __init__(self, table: str, row: Optional[int], message: str):
        self.table = table
        self.row = row
        self.message = message
        locus = table if row is None else f"{table}:{row}"
        super().__init__(f"{locus}: {message}")


class InfeasibleParameters(Exception):
    pass


@dataclass(frozen=True)
class Instance:
    network: RoadNetwork
    fleet: tuple[Vehicle, ...]
    orders: tuple[Order, ...]
    config: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if len(self.fleet) == 0:
            raise InstanceFormatError("vehicles", None, "the fleet is empty")
        if len(self.orders) == 0:
            raise InstanceFormatError("orders", None, "there are no orders")
        for order in self.orders:
            for factory_id in (order.pickup_factory_id, order.delivery_factory_id):
                if factory_id not in self.network.factories:
                    raise InstanceFormatError(
                        "orders", None, f"order {order.id} uses unknown factory {factory_id}"
                    )
        assert list(self.orders) == sorted(self.orders, key=_order_key)

    @property
    def order_by_id(self) -> dict[str, Order]:
        return {order.id: order for order in self.orders}


def _order_key(order: Order):
    return (order.creation_time, order.id)


def _rows(table: str, text: str, columns: list[str]) -> list[tuple[int, dict]]:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in columns if c not in header]
    if len(missing) > 0:
        raise InstanceFormatError(table, 1, f"missing columns {missing}")
    # row numbers count the header as row 1
    return [(number, row) for number, row in enumerate(reader, start=2)]


def _field(table: str, number: int, row: dict, column: str, convert: Callable):
    value = row[column]
    if value is None:
        raise InstanceFormatError(table, number, f"{column} is missing")
    try:
        return convert(value.strip())
    except (ValueError, ArithmeticError, DomainError) as e:
        raise InstanceFormatError(table, number, f"bad {column} {value!r}: {e}")


def _count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError("negative quantity")
    return value


def parse_factory_table(text: str) -> dict[str, Factory]:
    table = "factory_info"
    factories = {}
    for number, row in _rows(table, text, factory_columns):
        factory_id = _field(table, number, row, "factory_id", str)
        if factory_id in factories:
            raise InstanceFormatError(table, number, f"duplicate factory {factory_id}")
        try:
            factories[factory_id] = Factory(
                id=factory_id,
                longitude=_field(table, number, row, "longitude", float),
                latitude=_field(table, number, row, "latitude", float),
                dock_count=_field(table, number, row, "port_num", int),
            )
        except DomainError as e:
            raise InstanceFormatError(table, number, str(e))
    return factories


def parse_route_table(text: str, factories: dict[str, Factory]) -> RoadNetwork:
    table = "route_map"
    edges = {}
    for number, row in _rows(table, text, route_columns):
        start = _field(table, number, row, "start_factory_id", str)
        end = _field(table, number, row, "end_factory_id", str)
        for factory_id in (start, end):
            if factory_id not in factories:
                raise InstanceFormatError(table, number, f"unknown factory {factory_id}")
        if start == end:
            continue
        try:
            edges[start, end] = Edge(
                distance=_field(table, number, row, "distance", float),
                travel_time=_field(table, number, row, "time", lambda t: int(float(t))),
            )
        except DomainError as e:
            raise InstanceFormatError(table, number, str(e))
    try:
        return RoadNetwork(factories=factories, edges=edges)
    except IncompleteGraph as e:
        raise InstanceFormatError(table, None, str(e))


def parse_vehicle_table(text: str) -> tuple[Vehicle, ...]:
    table = "vehicles"
    fleet = []
    for number, row in _rows(table, text, vehicle_columns):
        try:
            fleet.append(
                Vehicle(
                    id=_field(table, number, row, "car_num", str),
                    capacity=_field(table, number, row, "capacity", Fraction),
                    operation_time=_field(table, number, row, "operation_time", int),
                    gps_id=_field(table, number, row, "gps_id", str),
                )
            )
        except DomainError as e:
            raise InstanceFormatError(table, number, str(e))
    if len({v.id for v in fleet}) != len(fleet):
        raise InstanceFormatError(table, None, "duplicate vehicle ids")
    return tuple(fleet)


def parse_order_table(
    text: str, factories: dict[str, Factory], config: SimConfig
) -> tuple[Order, ...]:
    table = "orders"
    orders = []
    seen = set()
    for number, row in _rows(table, text, order_columns):
        order_id = _field(table, number, row, "order_id", str)
        if order_id in seen:
            raise InstanceFormatError(table, number, f"duplicate order {order_id}")
        seen.add(order_id)

        quantity = PalletQuantity(
            standard=_field(table, number, row, "q_standard", _count),
            small=_field(table, number, row, "q_small", _count),
            box=_field(table, number, row, "q_box", _count),
        )
        if quantity.is_empty:
            raise InstanceFormatError(table, number, f"order {order_id} has no cargo")
        if _field(table, number, row, "demand", to_quarters) != quantity.quarters:
            raise InstanceFormatError(
                table, number, f"demand {row['demand']} does not match the quantities"
            )

        creation_time = _field(table, number, row, "creation_time", parse_clock)
        committed = _field(table, number, row, "committed_completion_time", parse_clock)
        # the clock format has no dates, a committed time earlier than creation is on the next day
        if committed <= creation_time:
            committed += 86400

        pickup_id = _field(table, number, row, "pickup_id", str)
        delivery_id = _field(table, number, row, "delivery_id", str)
        for factory_id in (pickup_id, delivery_id):
            if factory_id not in factories:
                raise InstanceFormatError(table, number, f"unknown factory {factory_id}")

        try:
            order = Order(
                id=order_id,
                pickup_factory_id=pickup_id,
                delivery_factory_id=delivery_id,
                quantity=quantity,
                creation_time=creation_time,
                committed_completion_time=committed,
            )
        except DomainError as e:
            raise InstanceFormatError(table, number, str(e))

        # times equal to omega * demand are not stored, others override the item times
        load_time = _field(table, number, row, "load_time", lambda t: int(float(t)))
        unload_time = _field(table, number, row, "unload_time", lambda t: int(float(t)))
        load_default, unload_default = order_service_times(order, config.omega)
        orders.append(
            Order(
                id=order.id,
                pickup_factory_id=order.pickup_factory_id,
                delivery_factory_id=order.delivery_factory_id,
                quantity=order.quantity,
                creation_time=order.creation_time,
                committed_completion_time=order.committed_completion_time,
                load_time=None if load_time == load_default else load_time,
                unload_time=None if unload_time == unload_default else unload_time,
            )
        )
    return tuple(sorted(orders, key=_order_key))


def order_service_times(order: Order, omega: int) -> tuple[int, int]:
    items = explode_order(order, omega)
    return sum(i.load_time for i in items), sum(i.unload_time for i in items)


def parse_instance(
    order_table: str,
    vehicle_table: str,
    route_table: str,
    factory_table: str,
    config: Optional[SimConfig] = None,
) -> Instance:
    config = config or SimConfig()
    factories = parse_factory_table(factory_table)
    network = parse_route_table(route_table, factories)
    fleet = parse_vehicle_table(vehicle_table)
    orders = parse_order_table(order_table, factories, config)
    return Instance(network=network, fleet=fleet, orders=orders, config=config)


def read_instance(directory: Path, config: Optional[SimConfig] = None) -> Instance:
    directory = directory.expanduser()
    return parse_instance(
        order_table=(directory / defaults.orders).read_text(),
        vehicle_table=(directory / defaults.vehicles).read_text(),
        route_table=(directory / defaults.route_map).read_text(),
        factory_table=(directory / defaults.factory_info).read_text(),
        config=config,
    )


def _format_number(value) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return format_demand(to_quarters(value))
    return repr(value) if isinstance(value, float) else str(value)


def _table(columns: list[str], rows: list[list]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_number(value) for value in row])
    return out.getvalue()


def format_order_table(orders: tuple[Order, ...], config: SimConfig) -> str:
    rows = []
    for order in orders:
        load_default, unload_default = order_service_times(order, config.omega)
        rows.append(
            [
                order.id,
                order.quantity.standard,
                order.quantity.small,
                order.quantity.box,
                format_demand(order.quarters),
                format_clock(order.creation_time),
                format_clock(order.committed_completion_time),
                load_default if order.load_time is None else order.load_time,
                unload_default if order.unload_time is None else order.unload_time,
                order.pickup_factory_id,
                order.delivery_factory_id,
            ]
        )
    return _table(order_columns, rows)


def format_vehicle_table(fleet: tuple[Vehicle, ...]) -> str:
    return _table(
        vehicle_columns,
        [[v.id, v.capacity, v.operation_time, v.gps_id] for v in fleet],
    )


def format_route_table(network: RoadNetwork) -> str:
    rows = []
    for index, ((start, end), edge) in enumerate(sorted(network.edges.items()), start=1):
        rows.append([f"R{index:08d}", start, end, edge.distance, edge.travel_time])
    return _table(route_columns, rows)


def format_factory_table(network: RoadNetwork) -> str:
    return _table(
        factory_columns,
        [
            [f.id, f.longitude, f.latitude, f.dock_count]
            for f in network.factories.values()
        ],
    )


def write_instance(instance: Instance, directory: Path):
    directory = directory.expanduser()
    directory.mkdir(parents=True, exist_ok=True)
    (directory / defaults.orders).write_text(
        format_order_table(instance.orders, instance.config)
    )
    (directory / defaults.vehicles).write_text(format_vehicle_table(instance.fleet))
    (directory / defaults.route_map).write_text(format_route_table(instance.network))
    (directory / defaults.factory_info).write_text(format_factory_table(instance.network))


@dataclass(frozen=True)
class GeneratorParams:
    factory_count: int = 10
    vehicle_count: int = 5
    order_count: int = 50
    horizon: int = 86400
    capacity: int = 15
    committed_lead_time: int = 14400
    dock_count_range: tuple[int, int] = (1, 6)
    distance_range: tuple[float, float] = (5.0, 120.0)
    # km per hour, each route gets its own speed within +- speed_jitter
    speed: float = 40.0
    speed_jitter: float = 0.2
    # routes may exceed the direct connection by this factor
    asymmetry: float = 0.1
    # cargo per order, standard pallets are drawn from 0..max_standard
    max_standard: int = 6
    max_small: int = 3
    max_box: int = 3
    # share of orders that exceed the vehicle capacity and need to be split
    oversize_rate: float = 0.02
    seed: int = 0

    def validate(self):
        for name in ("factory_count", "vehicle_count", "order_count", "horizon", "capacity"):
            if getattr(self, name) < 1:
                raise InfeasibleParameters(f"{name} must be at least 1")
        if self.factory_count < 2:
            raise InfeasibleParameters("orders need at least 2 factories")
        if self.committed_lead_time < 1:
            raise InfeasibleParameters("committed_lead_time must be positive")
        low, high = self.dock_count_range
        if not (1 <= low <= high):
            raise InfeasibleParameters(f"bad dock_count_range {self.dock_count_range}")
        low, high = self.distance_range
        if not (0 < low <= high):
            raise InfeasibleParameters(f"bad distance_range {self.distance_range}")
        if self.speed <= 0 or not (0 <= self.speed_jitter < 1):
            raise InfeasibleParameters("bad speed or speed_jitter")
        if self.asymmetry < 0:
            raise InfeasibleParameters("asymmetry must not be negative")
        if self.max_standard + self.max_small + self.max_box < 1:
            raise InfeasibleParameters("orders cannot carry anything")
        if not (0 <= self.oversize_rate <= 1):
            raise InfeasibleParameters("oversize_rate must be within [0, 1]")


def _hex_id(rng: random.Random) -> str:
    return f"{rng.getrandbits(128):032x}"


def generate_instance(params: GeneratorParams, config: Optional[SimConfig] = None) -> Instance:
    params.validate()
    config = config or SimConfig()
    rng = random.Random(params.seed)

    # factories on a plane, coordinates are only carried along for the output files
    points = {}
    factories = {}
    for _ in range(params.factory_count):
        factory_id = _hex_id(rng)
        x, y = rng.random(), rng.random()
        points[factory_id] = (x, y)
        factories[factory_id] = Factory(
            id=factory_id,
            longitude=round(116.0 + x, 4),
            latitude=round(39.5 + y, 4),
            dock_count=rng.randint(*params.dock_count_range),
        )

    low, high = params.distance_range
    edges = {}
    for start, (x1, y1) in points.items():
        for end, (x2, y2) in points.items():
            if start == end:
                continue
            plane = math.hypot(x2 - x1, y2 - y1) / math.sqrt(2)
            distance = (low + (high - low) * plane) * (1 + rng.uniform(0, params.asymmetry))
            distance = round(distance, 1)
            speed = params.speed * rng.uniform(1 - params.speed_jitter, 1 + params.speed_jitter)
            edges[start, end] = Edge(
                distance=distance, travel_time=max(1, round(distance / speed * 3600))
            )
    network = RoadNetwork(factories=factories, edges=edges)

    fleet = tuple(
        Vehicle(
            id=f"V_{index}",
            capacity=Fraction(params.capacity),
            operation_time=24,
            gps_id=f"G_{index}",
        )
        for index in range(1, params.vehicle_count + 1)
    )

    factory_ids = list(factories)
    creation_times = sorted(rng.randrange(params.horizon) for _ in range(params.order_count))
    orders = []
    for index, creation_time in enumerate(creation_times, start=1):
        pickup_id, delivery_id = rng.sample(factory_ids, 2)
        if rng.random() < params.oversize_rate:
            extra = rng.randint(1, params.capacity)
            quantity = PalletQuantity(params.capacity + extra - 1, rng.randint(0, 3), 1)
        else:
            quantity = PalletQuantity()
            while quantity.is_empty:
                quantity = PalletQuantity(
                    rng.randint(0, params.max_standard),
                    rng.randint(0, params.max_small),
                    rng.randint(0, params.max_box),
                )
            if quantity.quarters > 4 * params.capacity:
                quantity = PalletQuantity(params.capacity)
        orders.append(
            Order(
                id=f"{index:010d}",
                pickup_factory_id=pickup_id,
                delivery_factory_id=delivery_id,
                quantity=quantity,
                creation_time=creation_time,
                committed_completion_time=creation_time + params.committed_lead_time,
            )
        )

    return Instance(network=network, fleet=fleet, orders=tuple(orders), config=config)
