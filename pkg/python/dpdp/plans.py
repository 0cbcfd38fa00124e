from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional


@dataclass(frozen=True)
class Stop:
    """a factory visit, deliveries are listed in unload order, pickups in load order"""

    factory_id: str
    pickup_item_ids: tuple[str, ...] = ()
    delivery_item_ids: tuple[str, ...] = ()
    # estimates, seconds from the horizon start
    arrive_time: Optional[int] = None
    leave_time: Optional[int] = None

    @property
    def is_empty(self) -> bool:
        return len(self.pickup_item_ids) == 0 and len(self.delivery_item_ids) == 0

    def same_manifest(self, other: Optional[Stop]) -> bool:
        return (
            other is not None
            and self.factory_id == other.factory_id
            and self.pickup_item_ids == other.pickup_item_ids
            and self.delivery_item_ids == other.delivery_item_ids
        )

    def without_times(self) -> Stop:
        return replace(self, arrive_time=None, leave_time=None)


@dataclass(frozen=True)
class DispatchPlan:
    """per vehicle the next destination and the stops after it"""

    destinations: dict[str, Optional[Stop]] = field(default_factory=dict)
    routes: dict[str, tuple[Stop, ...]] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> DispatchPlan:
        return cls()

    @property
    def vehicle_ids(self) -> list[str]:
        ids = list(self.destinations)
        ids.extend(v for v in self.routes if v not in self.destinations)
        return ids

    def destination(self, vehicle_id: str) -> Optional[Stop]:
        return self.destinations.get(vehicle_id)

    def route(self, vehicle_id: str) -> tuple[Stop, ...]:
        return tuple(self.routes.get(vehicle_id, ()))

    def stops(self, vehicle_id: str) -> list[Stop]:
        destination = self.destination(vehicle_id)
        if destination is None:
            return list(self.route(vehicle_id))
        return [destination, *self.route(vehicle_id)]

    def mentions(self, vehicle_id: str) -> bool:
        return vehicle_id in self.destinations or vehicle_id in self.routes

    def all_stops(self) -> Iterator[tuple[str, int, Stop]]:
        for vehicle_id in self.vehicle_ids:
            for index, stop in enumerate(self.stops(vehicle_id)):
                yield vehicle_id, index, stop

    def planned_item_ids(self) -> set[str]:
        return {
            item_id
            for _, _, stop in self.all_stops()
            for item_id in (*stop.pickup_item_ids, *stop.delivery_item_ids)
        }

    def without_times(self) -> DispatchPlan:
        return DispatchPlan(
            destinations={
                v: None if s is None else s.without_times()
                for v, s in self.destinations.items()
            },
            routes={v: tuple(s.without_times() for s in r) for v, r in self.routes.items()},
        )
