"""route drafts
a draft is the full list of stops a vehicle still has to visit, starting with its destination
    at a factory: the first stop is the committed stop and must stay as it is (frozen)
    in transit: the first stop stays at its factory (anchored) but its lists can change
    parked: nothing is fixed
everything here estimates without queuing at docks
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence

from dpdp.config import CompletionSemantics
from dpdp.domain import OrderItem
from dpdp.plans import DispatchPlan, Stop
from dpdp.snapshots import Snapshot, VehicleMode, VehicleView
from dpdp.validation import walk_stops


@dataclass(frozen=True)
class Shipment:
    """items of one order that travel together from one pickup to one delivery"""

    order_id: str
    # in load order
    item_ids: tuple[str, ...]
    pickup_factory_id: str
    delivery_factory_id: str
    quarters: int

    @classmethod
    def of(cls, items: Sequence[OrderItem]) -> Shipment:
        assert len({i.order_id for i in items}) == 1
        return cls(
            order_id=items[0].order_id,
            item_ids=tuple(i.id for i in items),
            pickup_factory_id=items[0].pickup_factory_id,
            delivery_factory_id=items[0].delivery_factory_id,
            quarters=sum(i.quarters for i in items),
        )


@dataclass
class RouteDraft:
    view: VehicleView
    stops: list[Stop] = field(default_factory=list)
    frozen: int = 0
    anchored: int = 0

    @property
    def vehicle_id(self) -> str:
        return self.view.vehicle_id

    @property
    def capacity_quarters(self) -> int:
        return self.view.capacity_quarters

    @property
    def insert_from(self) -> int:
        return max(self.frozen, self.anchored)

    @property
    def merge_from(self) -> int:
        return self.frozen

    def with_stops(self, stops: list[Stop]) -> RouteDraft:
        return replace(self, stops=stops)

    def tail_factory_id(self) -> str:
        if len(self.stops) > 0:
            return self.stops[-1].factory_id
        return self.view.position_factory_id


@dataclass(frozen=True)
class DraftCost:
    distance: float
    dock_time: int
    # latest estimated completion per order delivered on this draft
    completions: dict[str, int]


def split_items(items: Sequence[OrderItem], capacity_quarters: int) -> list[list[OrderItem]]:
    """chunks of at most the capacity, filled in item order, one chunk if everything fits"""
    if sum(i.quarters for i in items) <= capacity_quarters:
        return [list(items)]
    chunks = [[]]
    load = 0
    for item in items:
        if load + item.quarters > capacity_quarters:
            chunks.append([])
            load = 0
        chunks[-1].append(item)
        load += item.quarters
    return chunks


class PlanningContext:
    def __init__(
        self,
        snapshot: Snapshot,
        timeout_weight: float = 10000,
        dock_wait_weight: float = 0.0,
    ):
        self.snapshot = snapshot
        self.network = snapshot.network
        self.config = snapshot.config
        self.items = snapshot.items
        self.quarters = {i: item.quarters for i, item in self.items.items()}
        self.timeout_weight = timeout_weight
        self.dock_wait_weight = dock_wait_weight
        self.fleet_size = len(snapshot.vehicles)
        self.committed = {item.order_id: item.committed_completion_time for item in self.items.values()}

    # stops and feasibility

    def service_time(self, stop: Stop) -> int:
        if stop.is_empty:
            return 0
        return (
            self.config.dock_approach_time
            + sum(self.items[i].unload_time for i in stop.delivery_item_ids)
            + sum(self.items[i].load_time for i in stop.pickup_item_ids)
        )

    def effective(self, draft: RouteDraft) -> list[Stop]:
        if draft.frozen > 0:
            return [draft.view.remaining_committed(), *draft.stops[1:]]
        return draft.stops

    def feasible(self, draft: RouteDraft) -> bool:
        violations = walk_stops(
            draft.vehicle_id,
            draft.view.cargo,
            self.effective(draft),
            self.quarters,
            draft.capacity_quarters,
        )
        return len(violations) == 0

    # schedule and cost

    def schedule(self, draft: RouteDraft) -> list[tuple[int, int]]:
        """estimated (arrive, leave) per stop"""
        view = draft.view
        now = self.snapshot.now
        times = []
        factory_id = view.cur_factory_id
        t = now
        for index, stop in enumerate(self.effective(draft)):
            if index == 0 and view.mode is VehicleMode.AT_FACTORY:
                arrive = view.arrive_time
                if view.leave_time is not None:
                    leave = view.leave_time
                else:
                    leave = self._service_end(max(now, arrive), stop)
            else:
                if index == 0 and view.mode is VehicleMode.IN_TRANSIT:
                    arrive = view.eta
                else:
                    arrive = t + self.network.travel_time(factory_id, stop.factory_id)
                leave = arrive
                if not stop.is_empty:
                    leave = self._service_end(arrive, stop)
            times.append((arrive, leave))
            factory_id = stop.factory_id
            t = leave
        return times

    def _service_end(self, docked: int, stop: Stop) -> int:
        work = self.service_time(stop) - self.config.dock_approach_time
        return self.config.service_start(docked + self.config.dock_approach_time, work) + work

    def route_end(self, draft: RouteDraft) -> int:
        times = self.schedule(draft)
        if len(times) == 0:
            return self.snapshot.now
        return times[-1][1]

    def draft_cost(self, draft: RouteDraft) -> DraftCost:
        view = draft.view
        distance = 0.0
        dock_time = 0
        completions = {}
        factory_id = view.cur_factory_id
        arrival_semantics = self.config.completion_semantics is CompletionSemantics.ARRIVAL
        for index, (stop, (arrive, leave)) in enumerate(
            zip(self.effective(draft), self.schedule(draft))
        ):
            if factory_id is not None:
                distance += self.network.distance(factory_id, stop.factory_id)
            if index >= draft.frozen and not stop.is_empty:
                dock_time += self.config.dock_approach_time
            done = arrive if arrival_semantics else leave
            for item_id in stop.delivery_item_ids:
                order_id = self.items[item_id].order_id
                completions[order_id] = max(completions.get(order_id, done), done)
            factory_id = stop.factory_id
        return DraftCost(distance=distance, dock_time=dock_time, completions=completions)

    def total_cost(self, costs: Iterable[DraftCost]) -> float:
        distance = 0.0
        dock_time = 0
        completions = {}
        for cost in costs:
            distance += cost.distance
            dock_time += cost.dock_time
            for order_id, done in cost.completions.items():
                completions[order_id] = max(completions.get(order_id, done), done)
        timeout = sum(max(0, done - self.committed[o]) for o, done in completions.items())
        return (
            self.timeout_weight * timeout
            + distance / self.fleet_size
            + self.dock_wait_weight * dock_time
        )

    def lateness(self, draft: RouteDraft, order_ids: Iterable[str]) -> int:
        completions = self.draft_cost(draft).completions
        return sum(
            max(0, completions[o] - self.committed[o]) for o in order_ids if o in completions
        )

    # drafts and plans

    def base_drafts(self) -> dict[str, RouteDraft]:
        """what every vehicle has to do anyway: its fixed first stop and the delivery of its load"""
        drafts = {}
        for view in self.snapshot.vehicles:
            if view.mode is VehicleMode.AT_FACTORY:
                draft = RouteDraft(view=view, stops=[view.destination], frozen=1)
            elif view.mode is VehicleMode.IN_TRANSIT:
                draft = RouteDraft(view=view, stops=[view.destination], anchored=1)
            else:
                draft = RouteDraft(view=view)
            stack = self._stack_after(view.cargo, self.effective(draft))
            draft.stops.extend(self._delivery_stops(stack))
            drafts[view.vehicle_id] = draft
        return drafts

    def drafts_from_plan(self, plan: DispatchPlan) -> dict[str, RouteDraft]:
        drafts = {}
        for view in self.snapshot.vehicles:
            stops = [s.without_times() for s in plan.stops(view.vehicle_id)]
            if view.mode is VehicleMode.AT_FACTORY:
                drafts[view.vehicle_id] = RouteDraft(
                    view=view, stops=[view.destination, *stops[1:]], frozen=1
                )
            elif view.mode is VehicleMode.IN_TRANSIT:
                drafts[view.vehicle_id] = RouteDraft(view=view, stops=stops, anchored=1)
            else:
                drafts[view.vehicle_id] = RouteDraft(view=view, stops=stops)
        return drafts

    def to_plan(self, drafts: dict[str, RouteDraft]) -> DispatchPlan:
        destinations = {}
        routes = {}
        for view in self.snapshot.vehicles:
            draft = drafts[view.vehicle_id]
            stops = [
                stop if index < draft.frozen else replace(stop, arrive_time=arrive, leave_time=leave)
                for index, (stop, (arrive, leave)) in enumerate(
                    zip(draft.stops, self.schedule(draft))
                )
            ]
            destinations[view.vehicle_id] = stops[0] if len(stops) > 0 else None
            routes[view.vehicle_id] = tuple(stops[1:])
        return DispatchPlan(destinations=destinations, routes=routes)

    def _stack_after(self, cargo: Sequence[str], stops: Sequence[Stop]) -> list[str]:
        stack = list(cargo)
        for stop in stops:
            for item_id in stop.delivery_item_ids:
                stack.remove(item_id)
            stack.extend(stop.pickup_item_ids)
        return stack

    def _delivery_stops(self, stack: list[str]) -> list[Stop]:
        # unload from the top, consecutive items for the same factory share a stop
        stops = []
        for item_id in reversed(stack):
            factory_id = self.items[item_id].delivery_factory_id
            if len(stops) > 0 and stops[-1].factory_id == factory_id:
                stops[-1] = replace(
                    stops[-1], delivery_item_ids=(*stops[-1].delivery_item_ids, item_id)
                )
            else:
                stops.append(Stop(factory_id=factory_id, delivery_item_ids=(item_id,)))
        return stops

    # moves

    def append_shipment(self, draft: RouteDraft, shipment: Shipment) -> RouteDraft:
        return self.append_batch(
            draft, shipment.pickup_factory_id, [(shipment.delivery_factory_id, shipment.item_ids)]
        )

    def append_batch(
        self,
        draft: RouteDraft,
        pickup_factory_id: str,
        deliveries: Sequence[tuple[str, Sequence[str]]],
    ) -> RouteDraft:
        """one pickup and then the deliveries in the given order, at the end of the route"""
        pickups = tuple(i for _, item_ids in reversed(deliveries) for i in item_ids)
        stops = list(draft.stops)
        last = len(stops) - 1
        if last >= draft.merge_from and stops[last].factory_id == pickup_factory_id:
            stops[last] = replace(stops[last], pickup_item_ids=stops[last].pickup_item_ids + pickups)
        else:
            stops.append(Stop(factory_id=pickup_factory_id, pickup_item_ids=pickups))
        for factory_id, item_ids in deliveries:
            stops.append(Stop(factory_id=factory_id, delivery_item_ids=tuple(reversed(item_ids))))
        return draft.with_stops(stops)

    def insertions(
        self, draft: RouteDraft, shipment: Shipment, merge_only: bool = False
    ) -> Iterator[RouteDraft]:
        """feasible drafts with the shipment picked up and delivered right after"""
        if shipment.quarters > draft.capacity_quarters:
            return
        pickups = shipment.item_ids
        deliveries = tuple(reversed(shipment.item_ids))
        stops = draft.stops

        def with_delivery(candidate: list[Stop], after: int) -> Iterator[list[Stop]]:
            following = after + 1
            if (
                following < len(candidate)
                and following >= draft.merge_from
                and candidate[following].factory_id == shipment.delivery_factory_id
            ):
                merged = list(candidate)
                merged[following] = replace(
                    merged[following],
                    delivery_item_ids=deliveries + merged[following].delivery_item_ids,
                )
                yield merged
            inserted = list(candidate)
            inserted.insert(
                following, Stop(factory_id=shipment.delivery_factory_id, delivery_item_ids=deliveries)
            )
            yield inserted

        candidates = []
        for index in range(draft.merge_from, len(stops)):
            if stops[index].factory_id != shipment.pickup_factory_id:
                continue
            merged = list(stops)
            merged[index] = replace(merged[index], pickup_item_ids=merged[index].pickup_item_ids + pickups)
            candidates.extend(with_delivery(merged, index))
        if not merge_only:
            for index in range(draft.insert_from, len(stops) + 1):
                inserted = list(stops)
                inserted.insert(
                    index, Stop(factory_id=shipment.pickup_factory_id, pickup_item_ids=pickups)
                )
                candidates.extend(with_delivery(inserted, index))

        for candidate in candidates:
            new = draft.with_stops(candidate)
            if self.feasible(new):
                yield new

    def shipments(self, draft: RouteDraft) -> list[Shipment]:
        """the shipments a draft picks up itself, outside of frozen stops"""
        delivered_at = {}
        for index, stop in enumerate(draft.stops):
            for item_id in stop.delivery_item_ids:
                delivered_at[item_id] = index
        shipments = []
        for index in range(draft.merge_from, len(draft.stops)):
            by_order = {}
            for item_id in draft.stops[index].pickup_item_ids:
                by_order.setdefault(self.items[item_id].order_id, []).append(self.items[item_id])
            for items in by_order.values():
                if len({delivered_at.get(i.id) for i in items}) != 1:
                    continue
                if delivered_at.get(items[0].id) is None:
                    continue
                shipments.append(Shipment.of(items))
        return shipments

    def remove_shipment(self, draft: RouteDraft, shipment: Shipment) -> RouteDraft:
        removed = set(shipment.item_ids)
        stops = []
        for index, stop in enumerate(draft.stops):
            if index >= draft.merge_from:
                stop = replace(
                    stop,
                    pickup_item_ids=tuple(i for i in stop.pickup_item_ids if i not in removed),
                    delivery_item_ids=tuple(i for i in stop.delivery_item_ids if i not in removed),
                )
                if stop.is_empty and index >= draft.insert_from:
                    continue
            stops.append(stop)
        return draft.with_stops(stops)

    def added_travel_time(self, draft: RouteDraft, pickup_factory_id: str, path: Sequence[str]) -> int:
        """travel time of going from the end of the route to the pickup and along the path"""
        total = self.network.travel_time(draft.tail_factory_id(), pickup_factory_id)
        factory_id = pickup_factory_id
        for next_id in path:
            total += self.network.travel_time(factory_id, next_id)
            factory_id = next_id
        return total


def best_vehicle_key(
    ctx: PlanningContext,
    candidate: RouteDraft,
    added_travel_time: int,
    order_ids: Iterable[str],
) -> tuple:
    """on time candidates by added travel time, otherwise by lateness, then vehicle id"""
    lateness = ctx.lateness(candidate, order_ids)
    if lateness == 0:
        return (0, added_travel_time, candidate.vehicle_id)
    return (1, lateness, candidate.vehicle_id)


def nearest_neighbour_order(ctx: PlanningContext, start_id: str, factory_ids: Iterable[str]) -> list[str]:
    remaining = sorted(set(factory_ids))
    path = []
    current = start_id
    while len(remaining) > 0:
        current = min(remaining, key=lambda f: (ctx.network.travel_time(current, f), f))
        remaining.remove(current)
        path.append(current)
    return path


def plan_cost(ctx: PlanningContext, drafts: dict[str, RouteDraft]) -> float:
    return ctx.total_cost(ctx.draft_cost(d) for d in drafts.values())


def forced_vehicle(drafts: dict[str, RouteDraft], quarters: int) -> Optional[RouteDraft]:
    """the least busy vehicle that can carry the quarters at all"""
    candidates = [d for d in drafts.values() if d.capacity_quarters >= quarters]
    if len(candidates) == 0:
        return None
    return min(candidates, key=lambda d: (len(d.stops), d.vehicle_id))
