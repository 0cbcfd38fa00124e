from __future__ import annotations

import enum
import random
import time
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Optional

from dpdp import logging
from dpdp.config import ConfigError
from dpdp.planning import DraftCost, PlanningContext, RouteDraft, Shipment
from dpdp.plans import DispatchPlan
from dpdp.snapshots import Snapshot
from dpdp.validation import PlanRejected, validate_dispatch


class Neighborhood(enum.Enum):
    # move a pickup and delivery pair to another vehicle, or exchange pairs between two
    INTER_ROUTE_SWAP = "inter-route-swap"
    # move a pickup and delivery pair elsewhere in its own route
    INTRA_ROUTE_RELOCATE = "intra-route-relocate"


@dataclass(frozen=True)
class VnsConfig:
    max_iterations: int = 200
    # seconds
    time_budget: float = 30.0
    neighborhoods: tuple[Neighborhood, ...] = (
        Neighborhood.INTER_ROUTE_SWAP,
        Neighborhood.INTRA_ROUTE_RELOCATE,
    )
    rng_seed: int = 0
    timeout_weight: float = 10000
    dock_wait_weight: float = 0.0

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must not be negative, got {self.max_iterations}")
        if self.time_budget <= 0:
            raise ConfigError(f"time_budget must be positive, got {self.time_budget}")
        if self.timeout_weight < 0 or self.dock_wait_weight < 0:
            raise ConfigError("cost weights must not be negative")
        if len(self.neighborhoods) == 0:
            raise ConfigError("at least one neighborhood is needed")

    def with_seed(self, rng_seed: int) -> VnsConfig:
        return replace(self, rng_seed=rng_seed)

    @classmethod
    def from_dict(cls, params: dict[str, Any]) -> VnsConfig:
        params = dict(params)
        if "neighborhoods" in params:
            try:
                params["neighborhoods"] = tuple(Neighborhood(n) for n in params["neighborhoods"])
            except ValueError as e:
                raise ConfigError(str(e))
        try:
            return cls(**params)
        except TypeError as e:
            raise ConfigError(f"bad vns parameters: {e}")


# below this a change in cost is noise
_epsilon = 1e-9


class _Search:
    def __init__(self, ctx: PlanningContext, drafts: dict[str, RouteDraft], rng: random.Random):
        self.ctx = ctx
        self.drafts = drafts
        self.costs: dict[str, DraftCost] = {v: ctx.draft_cost(d) for v, d in drafts.items()}
        self.cost = ctx.total_cost(self.costs.values())
        self.rng = rng

    def cost_with(self, changed: dict[str, RouteDraft]) -> float:
        costs = dict(self.costs)
        for vehicle_id, draft in changed.items():
            costs[vehicle_id] = self.ctx.draft_cost(draft)
        return self.ctx.total_cost(costs.values())

    def accept(self, changed: dict[str, RouteDraft], cost: float):
        for vehicle_id, draft in changed.items():
            self.drafts[vehicle_id] = draft
            self.costs[vehicle_id] = self.ctx.draft_cost(draft)
        self.cost = cost

    def shuffled(self, values: list) -> list:
        values = list(values)
        self.rng.shuffle(values)
        return values

    def _best_insertion(self, draft: RouteDraft, shipment: Shipment) -> Optional[RouteDraft]:
        best = None
        for candidate in self.ctx.insertions(draft, shipment):
            cost = self.cost_with({draft.vehicle_id: candidate})
            if best is None or cost < best[0]:
                best = (cost, candidate)
        return None if best is None else best[1]

    def intra_route_relocate(self) -> Iterator[dict[str, RouteDraft]]:
        for vehicle_id in self.shuffled(sorted(self.drafts)):
            draft = self.drafts[vehicle_id]
            for shipment in self.shuffled(self.ctx.shipments(draft)):
                removed = self.ctx.remove_shipment(draft, shipment)
                for candidate in self.ctx.insertions(removed, shipment):
                    if candidate.stops != draft.stops:
                        yield {vehicle_id: candidate}

    def inter_route_swap(self) -> Iterator[dict[str, RouteDraft]]:
        vehicle_ids = sorted(self.drafts)
        pairs = [(a, b) for a in vehicle_ids for b in vehicle_ids if a != b]
        for a, b in self.shuffled(pairs):
            draft_a, draft_b = self.drafts[a], self.drafts[b]
            for shipment in self.shuffled(self.ctx.shipments(draft_a)):
                removed_a = self.ctx.remove_shipment(draft_a, shipment)
                for candidate in self.ctx.insertions(draft_b, shipment):
                    yield {a: removed_a, b: candidate}
                for other in self.shuffled(self.ctx.shipments(draft_b)):
                    removed_b = self.ctx.remove_shipment(draft_b, other)
                    new_b = self._best_insertion(removed_b, shipment)
                    new_a = self._best_insertion(removed_a, other)
                    if new_a is not None and new_b is not None:
                        yield {a: new_a, b: new_b}

    def first_improvement(self, neighborhood: Neighborhood, out_of_budget: Callable[[], bool]) -> bool:
        moves = {
            Neighborhood.INTER_ROUTE_SWAP: self.inter_route_swap,
            Neighborhood.INTRA_ROUTE_RELOCATE: self.intra_route_relocate,
        }[neighborhood]()
        for changed in moves:
            if out_of_budget():
                return False
            cost = self.cost_with(changed)
            if cost < self.cost - _epsilon:
                self.accept(changed, cost)
                return True
        return False


def vns_improve(
    snapshot: Snapshot,
    initial_plan: DispatchPlan,
    cfg: VnsConfig,
    clock: Callable[[], float] = time.monotonic,
    trace: Optional[list[float]] = None,
) -> DispatchPlan:
    """variable neighborhood descent over the uncommitted parts of the routes

    moves are only accepted when they keep the plan valid and strictly lower the cost
    trace, if given, receives the cost at the start and after every accepted move
    """
    violations = validate_dispatch(snapshot, initial_plan)
    if len(violations) > 0:
        raise PlanRejected(violations)

    ctx = PlanningContext(
        snapshot, timeout_weight=cfg.timeout_weight, dock_wait_weight=cfg.dock_wait_weight
    )
    search = _Search(ctx, ctx.drafts_from_plan(initial_plan), random.Random(cfg.rng_seed))
    if trace is not None:
        trace.append(search.cost)

    deadline = clock() + cfg.time_budget
    iterations = 0
    improved_any = False
    k = 0
    while k < len(cfg.neighborhoods) and iterations < cfg.max_iterations:
        if clock() > deadline:
            break
        iterations += 1
        if search.first_improvement(cfg.neighborhoods[k], lambda: clock() > deadline):
            improved_any = True
            if trace is not None:
                trace.append(search.cost)
            k = 0
        else:
            k += 1

    if not improved_any:
        return initial_plan

    plan = ctx.to_plan(search.drafts)
    violations = validate_dispatch(snapshot, plan)
    if len(violations) > 0:
        logging.error(f"vns produced an invalid plan, keeping the initial one: {violations[0]}")
        return initial_plan
    logging.debug(f"vns at {snapshot.now}: cost {search.cost} after {iterations} iterations")
    return plan
