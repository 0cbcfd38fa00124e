from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

from dpdp import logging
from dpdp.config import ConfigError
from dpdp.domain import OrderItem
from dpdp.planning import (
    PlanningContext,
    RouteDraft,
    Shipment,
    best_vehicle_key,
    forced_vehicle,
    nearest_neighbour_order,
    split_items,
)
from dpdp.plans import DispatchPlan
from dpdp.snapshots import Snapshot
from dpdp.vns import VnsConfig, vns_improve


class PolicyTimeout(Exception):
    pass


class PolicyProtocolError(Exception):
    pass


class DispatchPolicy:
    """decides a plan for every snapshot, may keep memory across rounds"""

    name = "policy"

    def decide(self, snapshot: Snapshot) -> DispatchPlan:
        raise NotImplementedError()

    def close(self):
        pass


def _orders_by_urgency(snapshot: Snapshot) -> list[tuple[str, list[OrderItem]]]:
    orders = snapshot.unallocated_by_order()
    return sorted(
        orders.items(),
        key=lambda o: (o[1][0].committed_completion_time, o[1][0].creation_time, o[0]),
    )


def _assign_shipment(ctx: PlanningContext, drafts: dict[str, RouteDraft], shipment: Shipment):
    best = None
    for vehicle_id in sorted(drafts):
        draft = drafts[vehicle_id]
        if shipment.quarters > draft.capacity_quarters:
            continue
        candidate = ctx.append_shipment(draft, shipment)
        if not ctx.feasible(candidate):
            continue
        added = ctx.added_travel_time(
            draft, shipment.pickup_factory_id, [shipment.delivery_factory_id]
        )
        key = best_vehicle_key(ctx, candidate, added, [shipment.order_id])
        if best is None or key < best[0]:
            best = (key, candidate)

    if best is None:
        draft = forced_vehicle(drafts, shipment.quarters)
        if draft is None:
            logging.warning(f"no vehicle can carry a part of order {shipment.order_id}")
            return
        logging.warning(f"forcing a part of order {shipment.order_id} onto {draft.vehicle_id}")
        drafts[draft.vehicle_id] = ctx.append_shipment(draft, shipment)
        return
    drafts[best[1].vehicle_id] = best[1]


def greedy_drafts(ctx: PlanningContext) -> dict[str, RouteDraft]:
    drafts = ctx.base_drafts()
    capacity = ctx.snapshot.fleet_capacity_quarters
    for _, items in _orders_by_urgency(ctx.snapshot):
        for chunk in split_items(items, capacity):
            _assign_shipment(ctx, drafts, Shipment.of(chunk))
    return drafts


def greedy_policy(snapshot: Snapshot) -> DispatchPlan:
    """every unallocated order by urgency to the vehicle adding the least travel time"""
    ctx = PlanningContext(snapshot)
    return ctx.to_plan(greedy_drafts(ctx))


class GreedyPolicy(DispatchPolicy):
    name = "greedy"

    def decide(self, snapshot: Snapshot) -> DispatchPlan:
        return greedy_policy(snapshot)


@dataclass(frozen=True)
class ThresholdParams:
    # seconds before the committed completion time
    time_threshold: int = 3600
    # share of the vehicle capacity
    fill_threshold: Fraction = Fraction(4, 5)
    hitch_rides: bool = True
    # seconds a hitch ride may delay the rest of the route
    hitch_max_detour: int = 1800

    def __post_init__(self):
        if self.time_threshold < 0:
            raise ConfigError(f"time_threshold must not be negative, got {self.time_threshold}")
        if not (0 < self.fill_threshold <= 1):
            raise ConfigError(f"fill_threshold must be within (0, 1], got {self.fill_threshold}")
        if self.hitch_max_detour < 0:
            raise ConfigError("hitch_max_detour must not be negative")

    @classmethod
    def from_dict(cls, params: dict[str, Any]) -> ThresholdParams:
        params = dict(params)
        if "fill_threshold" in params:
            params["fill_threshold"] = Fraction(str(params["fill_threshold"]))
        try:
            return cls(**params)
        except TypeError as e:
            raise ConfigError(f"bad threshold parameters: {e}")


def release_due(
    snapshot: Snapshot,
    items: list[OrderItem],
    pickup_quarters: int,
    params: ThresholdParams,
) -> bool:
    """whether an order waiting for dispatch should go out this round"""
    now = snapshot.now
    config = snapshot.config
    first = items[0]
    if first.committed_completion_time - now <= params.time_threshold:
        return True
    if now - first.creation_time >= config.dispatch_deadline - config.epoch_length:
        return True
    capacity = snapshot.fleet_capacity_quarters
    return pickup_quarters >= params.fill_threshold * capacity


def _try_hitch(
    ctx: PlanningContext,
    drafts: dict[str, RouteDraft],
    shipment: Shipment,
    params: ThresholdParams,
) -> bool:
    best = None
    for vehicle_id in sorted(drafts):
        draft = drafts[vehicle_id]
        if len(draft.stops) == 0:
            continue
        end = ctx.route_end(draft)
        for candidate in ctx.insertions(draft, shipment, merge_only=True):
            detour = ctx.route_end(candidate) - end
            if detour > params.hitch_max_detour:
                continue
            if ctx.lateness(candidate, [shipment.order_id]) > 0:
                continue
            key = (detour, vehicle_id)
            if best is None or key < best[0]:
                best = (key, candidate)
    if best is None:
        return False
    drafts[best[1].vehicle_id] = best[1]
    return True


def _batches(shipments: list[Shipment], capacity: int) -> list[list[Shipment]]:
    batches = []
    for shipment in shipments:
        for batch in batches:
            if sum(s.quarters for s in batch) + shipment.quarters <= capacity:
                batch.append(shipment)
                break
        else:
            batches.append([shipment])
    return batches


def _assign_batch(ctx: PlanningContext, drafts: dict[str, RouteDraft], batch: list[Shipment]):
    pickup_id = batch[0].pickup_factory_id
    path = nearest_neighbour_order(ctx, pickup_id, (s.delivery_factory_id for s in batch))
    deliveries = [
        (factory_id, tuple(i for s in batch if s.delivery_factory_id == factory_id for i in s.item_ids))
        for factory_id in path
    ]
    quarters = sum(s.quarters for s in batch)
    order_ids = [s.order_id for s in batch]

    best = None
    for vehicle_id in sorted(drafts):
        draft = drafts[vehicle_id]
        if quarters > draft.capacity_quarters:
            continue
        candidate = ctx.append_batch(draft, pickup_id, deliveries)
        if not ctx.feasible(candidate):
            continue
        key = best_vehicle_key(ctx, candidate, ctx.added_travel_time(draft, pickup_id, path), order_ids)
        if best is None or key < best[0]:
            best = (key, candidate)

    if best is None:
        for shipment in batch:
            _assign_shipment(ctx, drafts, shipment)
        return
    drafts[best[1].vehicle_id] = best[1]


def threshold_policy(
    snapshot: Snapshot,
    time_threshold: int = 3600,
    fill_threshold=Fraction(4, 5),
    hitch_rides: bool = True,
    hitch_max_detour: int = 1800,
) -> DispatchPlan:
    """holds orders back until they are urgent or enough cargo waits at their pickup factory"""
    params = ThresholdParams(
        time_threshold=time_threshold,
        fill_threshold=Fraction(str(fill_threshold)),
        hitch_rides=hitch_rides,
        hitch_max_detour=hitch_max_detour,
    )
    return ThresholdPolicy(params).decide(snapshot)


class ThresholdPolicy(DispatchPolicy):
    name = "threshold"

    def __init__(self, params: Optional[ThresholdParams] = None):
        self.params = params or ThresholdParams()

    def decide(self, snapshot: Snapshot) -> DispatchPlan:
        ctx = PlanningContext(snapshot)
        drafts = ctx.base_drafts()
        capacity = snapshot.fleet_capacity_quarters

        orders = _orders_by_urgency(snapshot)
        waiting_at = {}
        for _, items in orders:
            factory_id = items[0].pickup_factory_id
            waiting_at[factory_id] = waiting_at.get(factory_id, 0) + sum(i.quarters for i in items)

        released = []
        for order_id, items in orders:
            chunks = split_items(items, capacity)
            if (
                self.params.hitch_rides
                and len(chunks) == 1
                and _try_hitch(ctx, drafts, Shipment.of(items), self.params)
            ):
                logging.debug(f"order {order_id} rides along")
                continue
            if release_due(snapshot, items, waiting_at[items[0].pickup_factory_id], self.params):
                released.extend(Shipment.of(chunk) for chunk in chunks)

        by_pickup = {}
        for shipment in released:
            by_pickup.setdefault(shipment.pickup_factory_id, []).append(shipment)
        for factory_id in sorted(by_pickup, key=lambda f: (ctx.committed[by_pickup[f][0].order_id], f)):
            for batch in _batches(by_pickup[factory_id], capacity):
                _assign_batch(ctx, drafts, batch)

        return ctx.to_plan(drafts)


class IdlePolicy(DispatchPolicy):
    """never dispatches anything new, only keeps what is already fixed"""

    name = "idle"

    def decide(self, snapshot: Snapshot) -> DispatchPlan:
        ctx = PlanningContext(snapshot)
        return ctx.to_plan(ctx.base_drafts())


class VnsPolicy(DispatchPolicy):
    name = "vns"

    def __init__(self, config: Optional[VnsConfig] = None):
        self.config = config or VnsConfig()

    def decide(self, snapshot: Snapshot) -> DispatchPlan:
        initial = greedy_policy(snapshot)
        seed = random.Random(f"{self.config.rng_seed}:{snapshot.now}").getrandbits(64)
        return vns_improve(snapshot, initial, self.config.with_seed(seed))


policy_names = ["greedy", "threshold", "vns", "idle"]


def make_policy(name: str, params: Optional[dict[str, Any]] = None) -> DispatchPolicy:
    params = dict(params or {})
    if name == "greedy" or name == "idle":
        if len(params) > 0:
            raise ConfigError(f"{name} takes no parameters, got {sorted(params)}")
        return GreedyPolicy() if name == "greedy" else IdlePolicy()
    if name == "threshold":
        return ThresholdPolicy(ThresholdParams.from_dict(params))
    if name == "vns":
        return VnsPolicy(VnsConfig.from_dict(params))
    raise ConfigError(f"unknown policy {name!r}, known are {policy_names}")
