from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional

from dpdp.config import SimConfig
from dpdp.domain import OrderItem, RoadNetwork, to_quarters
from dpdp.plans import Stop


class VehicleMode(enum.Enum):
    PARKED = "parked"
    AT_FACTORY = "at-factory"
    IN_TRANSIT = "in-transit"


@dataclass(frozen=True)
class VehicleView:
    """what an algorithm gets to know about a vehicle, see vehicle_info.json"""

    vehicle_id: str
    capacity: Fraction
    operation_time: int
    update_time: int
    # None while in transit
    cur_factory_id: Optional[str]
    arrive_time: Optional[int]
    leave_time: Optional[int]
    # bottom to top, the order of loading
    cargo: tuple[str, ...]
    # committed stop when at a factory, locked destination when in transit
    destination: Optional[Stop]

    @property
    def mode(self) -> VehicleMode:
        if self.cur_factory_id is None:
            return VehicleMode.IN_TRANSIT
        if self.destination is None:
            return VehicleMode.PARKED
        return VehicleMode.AT_FACTORY

    @property
    def capacity_quarters(self) -> int:
        return to_quarters(self.capacity)

    @property
    def eta(self) -> Optional[int]:
        if self.mode is VehicleMode.IN_TRANSIT:
            return self.destination.arrive_time
        return None

    @property
    def committed_stop(self) -> Optional[Stop]:
        if self.mode is VehicleMode.AT_FACTORY:
            return self.destination
        return None

    def remaining_committed(self) -> Optional[Stop]:
        """the part of the committed stop that still has to be done"""
        stop = self.committed_stop
        if stop is None:
            return None
        cargo = set(self.cargo)
        return Stop(
            factory_id=stop.factory_id,
            delivery_item_ids=tuple(i for i in stop.delivery_item_ids if i in cargo),
            pickup_item_ids=tuple(i for i in stop.pickup_item_ids if i not in cargo),
            arrive_time=stop.arrive_time,
            leave_time=stop.leave_time,
        )

    @property
    def position_factory_id(self) -> str:
        """where the vehicle is or will be next"""
        if self.cur_factory_id is not None:
            return self.cur_factory_id
        return self.destination.factory_id


@dataclass(frozen=True)
class Snapshot:
    now: int
    vehicles: tuple[VehicleView, ...]
    unallocated: tuple[OrderItem, ...]
    ongoing: tuple[OrderItem, ...]
    network: RoadNetwork = field(repr=False)
    config: SimConfig = field(repr=False)
    completed_orders: int = field(default=0, compare=False)

    @cached_property
    def items(self) -> dict[str, OrderItem]:
        items = {item.id: item for item in self.unallocated}
        items.update((item.id, item) for item in self.ongoing)
        return items

    @cached_property
    def vehicle_by_id(self) -> dict[str, VehicleView]:
        return {v.vehicle_id: v for v in self.vehicles}

    @property
    def fleet_capacity_quarters(self) -> int:
        return max(v.capacity_quarters for v in self.vehicles)

    @property
    def epoch_index(self) -> int:
        return self.now // self.config.epoch_length

    def unallocated_by_order(self) -> dict[str, list[OrderItem]]:
        orders = {}
        for item in self.unallocated:
            orders.setdefault(item.order_id, []).append(item)
        return orders
