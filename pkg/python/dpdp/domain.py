"""pallet arithmetic
all demand is kept as an integer count of quarter pallets (1 box = 1 quarter)
1 standard pallet = 2 small pallets = 4 boxes
Fraction is only used at the edges, eg, when a demand is shown or compared to a capacity
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

Number = Union[int, float, str, Fraction]


class DomainError(Exception):
    pass


class InvalidQuantity(DomainError):
    pass


class InvalidOrder(DomainError):
    pass


class EmptyItemList(DomainError):
    pass


class PartitionError(DomainError):
    pass


class PalletType(enum.Enum):
    STANDARD = "STANDARD_PALLET"
    SMALL = "SMALL_PALLET"
    BOX = "BOX"

    @property
    def quarters(self) -> int:
        return _quarters_by_type[self]

    @property
    def demand(self) -> Fraction:
        return Fraction(self.quarters, 4)


_quarters_by_type = {
    PalletType.STANDARD: 4,
    PalletType.SMALL: 2,
    PalletType.BOX: 1,
}


class ItemStatus(enum.IntEnum):
    INITIALIZED = 0
    GENERATED = 1
    LOADED = 2
    DELIVERED = 3


def to_quarters(value: Number) -> int:
    """standard pallet equivalents to quarter units, must be exact"""
    quarters = Fraction(str(value)) * 4
    if quarters.denominator != 1:
        raise InvalidQuantity(f"{value} is not a multiple of a quarter pallet")
    return int(quarters)


def from_quarters(quarters: int) -> Fraction:
    return Fraction(quarters, 4)


def format_demand(quarters: int) -> str:
    whole, rest = divmod(quarters, 4)
    if rest == 0:
        return f"{whole}.0"
    return f"{whole}.{rest * 25:02d}".rstrip("0")


def round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


@dataclass(frozen=True)
class PalletQuantity:
    standard: int = 0
    small: int = 0
    box: int = 0

    def __post_init__(self):
        for name in ("standard", "small", "box"):
            count = getattr(self, name)
            if not isinstance(count, int) or isinstance(count, bool):
                raise InvalidQuantity(f"{name} must be an integer, got {count!r}")
            if count < 0:
                raise InvalidQuantity(f"{name} must not be negative, got {count}")

    @property
    def quarters(self) -> int:
        return 4 * self.standard + 2 * self.small + self.box

    @property
    def is_empty(self) -> bool:
        return self.quarters == 0

    def pallet_types(self) -> list[PalletType]:
        # standard first, then small, then box
        return (
            [PalletType.STANDARD] * self.standard
            + [PalletType.SMALL] * self.small
            + [PalletType.BOX] * self.box
        )


def demand(quantity: PalletQuantity) -> Fraction:
    return from_quarters(quantity.quarters)


@dataclass(frozen=True)
class Order:
    id: str
    pickup_factory_id: str
    delivery_factory_id: str
    quantity: PalletQuantity
    creation_time: int
    committed_completion_time: int
    # order totals as given by an instance file, None means omega * demand
    load_time: Optional[int] = None
    unload_time: Optional[int] = None

    def __post_init__(self):
        if self.creation_time < 0:
            raise InvalidOrder(f"order {self.id} is created before the start, at {self.creation_time}")
        if self.pickup_factory_id == self.delivery_factory_id:
            raise InvalidOrder(
                f"order {self.id} picks up and delivers at {self.pickup_factory_id}"
            )
        if self.committed_completion_time <= self.creation_time:
            raise InvalidOrder(
                f"order {self.id} is committed at {self.committed_completion_time} "
                f"but created at {self.creation_time}"
            )

    @property
    def quarters(self) -> int:
        return self.quantity.quarters

    @property
    def demand(self) -> Fraction:
        return demand(self.quantity)


@dataclass(frozen=True)
class OrderItem:
    id: str
    order_id: str
    pallet_type: PalletType
    pickup_factory_id: str
    delivery_factory_id: str
    creation_time: int
    committed_completion_time: int
    load_time: int
    unload_time: int
    order_quarters: int
    status: ItemStatus = ItemStatus.GENERATED

    @property
    def quarters(self) -> int:
        return self.pallet_type.quarters

    @property
    def demand(self) -> Fraction:
        return self.pallet_type.demand

    def with_status(self, status: ItemStatus) -> OrderItem:
        assert status >= self.status, (self.id, self.status, status)
        return replace(self, status=ItemStatus(status))


def item_id(order_id: str, ordinal: int) -> str:
    return f"{order_id}-{ordinal:04d}"


def _spread(total: int, shares: list[int]) -> list[int]:
    whole = sum(shares)
    return [round_half_up(Fraction(total * share, whole)) for share in shares]


def explode_order(order: Order, omega: int) -> list[OrderItem]:
    types = order.quantity.pallet_types()
    if len(types) == 0:
        raise InvalidQuantity(f"order {order.id} has no pallets or boxes")

    shares = [t.quarters for t in types]
    if order.load_time is None:
        load_times = [round_half_up(Fraction(omega * s, 4)) for s in shares]
    else:
        load_times = _spread(order.load_time, shares)
    if order.unload_time is None:
        unload_times = [round_half_up(Fraction(omega * s, 4)) for s in shares]
    else:
        unload_times = _spread(order.unload_time, shares)

    return [
        OrderItem(
            id=item_id(order.id, ordinal),
            order_id=order.id,
            pallet_type=pallet_type,
            pickup_factory_id=order.pickup_factory_id,
            delivery_factory_id=order.delivery_factory_id,
            creation_time=order.creation_time,
            committed_completion_time=order.committed_completion_time,
            load_time=load_time,
            unload_time=unload_time,
            order_quarters=order.quarters,
        )
        for ordinal, (pallet_type, load_time, unload_time) in enumerate(
            zip(types, load_times, unload_times), start=1
        )
    ]


def order_status(items: Sequence[OrderItem]) -> ItemStatus:
    if len(items) == 0:
        raise EmptyItemList("an order without items has no status")
    order_ids = {item.order_id for item in items}
    assert len(order_ids) == 1, order_ids
    return min(item.status for item in items)


class SplitVerdict(enum.Enum):
    LEGAL = "legal"
    NOT_SPLITTABLE = "order fits into one vehicle and must not be split"
    PART_OVER_CAPACITY = "a part exceeds the vehicle capacity"
    EMPTY_PART = "a part is empty"

    @property
    def legal(self) -> bool:
        return self is SplitVerdict.LEGAL


def split_verdict(
    order_quarters: int, capacity_quarters: int, part_quarters: Sequence[int]
) -> SplitVerdict:
    if any(q == 0 for q in part_quarters):
        return SplitVerdict.EMPTY_PART
    if len(part_quarters) > 1 and order_quarters <= capacity_quarters:
        return SplitVerdict.NOT_SPLITTABLE
    if any(q > capacity_quarters for q in part_quarters):
        return SplitVerdict.PART_OVER_CAPACITY
    return SplitVerdict.LEGAL


def split_legality(
    order: Order,
    capacity: Number,
    parts: Sequence[Sequence[OrderItem]],
    omega: int = 180,
) -> SplitVerdict:
    expected = Counter(item.id for item in explode_order(order, omega))
    proposed = Counter(item.id for part in parts for item in part)
    if proposed != expected:
        duplicated = sorted(i for i, c in proposed.items() if c > 1)
        missing = sorted(set(expected) - set(proposed))
        foreign = sorted(set(proposed) - set(expected))
        raise PartitionError(
            f"parts do not partition order {order.id}: "
            f"duplicated={duplicated} missing={missing} foreign={foreign}"
        )
    return split_verdict(
        order.quarters,
        to_quarters(capacity),
        [sum(item.quarters for item in part) for part in parts],
    )


@dataclass(frozen=True)
class Vehicle:
    id: str
    capacity: Fraction
    operation_time: int = 24
    gps_id: str = ""

    def __post_init__(self):
        if self.capacity <= 0:
            raise DomainError(f"vehicle {self.id} has capacity {self.capacity}")

    @property
    def capacity_quarters(self) -> int:
        return to_quarters(self.capacity)


@dataclass(frozen=True)
class Factory:
    id: str
    longitude: float
    latitude: float
    dock_count: int

    def __post_init__(self):
        if self.dock_count < 1:
            raise DomainError(f"factory {self.id} has {self.dock_count} docks")


@dataclass(frozen=True)
class Edge:
    distance: float
    travel_time: int

    def __post_init__(self):
        if self.distance < 0 or self.travel_time < 0:
            raise DomainError(f"negative edge {self}")


_no_edge = Edge(distance=0.0, travel_time=0)


class IncompleteGraph(DomainError):
    pass


@dataclass(frozen=True, eq=True)
class RoadNetwork:
    factories: dict[str, Factory]
    edges: dict[tuple[str, str], Edge]

    def __post_init__(self):
        missing = [
            (a, b)
            for a in self.factories
            for b in self.factories
            if a != b and (a, b) not in self.edges
        ]
        if len(missing) > 0:
            raise IncompleteGraph(
                f"incomplete graph: {len(missing)} ordered pairs have no route, "
                f"eg, {missing[0][0]} -> {missing[0][1]}"
            )
        unknown = [
            pair
            for pair in self.edges
            if pair[0] not in self.factories or pair[1] not in self.factories
        ]
        if len(unknown) > 0:
            raise IncompleteGraph(f"route between unknown factories {unknown[0]}")

    def edge(self, start: str, end: str) -> Edge:
        if start == end:
            return _no_edge
        return self.edges[start, end]

    def distance(self, start: str, end: str) -> float:
        return self.edge(start, end).distance

    def travel_time(self, start: str, end: str) -> int:
        return self.edge(start, end).travel_time

    def dock_count(self, factory_id: str) -> int:
        return self.factories[factory_id].dock_count
