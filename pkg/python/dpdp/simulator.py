from __future__ import annotations

import enum
import heapq
import random
import time
from collections import deque
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Union

from dpdp import logging
from dpdp.domain import ItemStatus, OrderItem, explode_order, to_quarters
from dpdp.event_log import EventKind, SimEvent
from dpdp.instances import Instance
from dpdp.plans import DispatchPlan, Stop
from dpdp.policies import DispatchPolicy, PolicyProtocolError, PolicyTimeout
from dpdp.scoring import ScoreReport, score
from dpdp.snapshots import Snapshot, VehicleView
from dpdp.utils import ffield
from dpdp.validation import PlanRejected, Violation, validate_dispatch


class SimulationFault(Exception):
    """the state machine reached a state it must never reach"""


@dataclass
class Parked:
    factory_id: str
    arrive_time: int
    leave_time: int


@dataclass
class AtFactory:
    factory_id: str
    arrive_time: int
    allocated_dock: bool = False
    # known once a dock is allocated
    leave_time: Optional[int] = None


@dataclass
class InTransit:
    origin_id: str
    destination_id: str
    departure_time: int
    eta: int


Position = Union[Parked, AtFactory, InTransit]


@dataclass
class VehicleState:
    vehicle_id: str
    capacity: Fraction
    operation_time: int
    position: Position
    # bottom to top
    cargo: list[str] = ffield(list)
    # pickup and delivery lists generated on arrival
    committed_stop: Optional[Stop] = None
    # the stop the vehicle drives to, its lists stay editable until arrival
    destination: Optional[Stop] = None
    planned_route: list[Stop] = ffield(list)


@dataclass
class DockState:
    factory_id: str
    dock_count: int
    in_use: set[str] = ffield(set)
    queue: deque = ffield(deque)

    @property
    def free(self) -> int:
        return self.dock_count - len(self.in_use)


class AbortReason(enum.Enum):
    DISPATCH_DEADLINE = "dispatch-deadline"
    HORIZON_EXCEEDED = "horizon-exceeded"


@dataclass(frozen=True)
class Finished:
    time: int
    epoch: int


@dataclass(frozen=True)
class Aborted:
    reason: AbortReason
    time: int
    epoch: int
    detail: str = ""


class RunStatus(enum.Enum):
    FINISHED = "finished"
    DISPATCH_DEADLINE = "dispatch-deadline"
    HORIZON_EXCEEDED = "horizon-exceeded"
    TIMEOUT = "timeout"
    VALIDATION = "validation"
    PROTOCOL = "protocol"


class _Action(enum.Enum):
    ARRIVE = "arrive"
    DELIVER = "deliver"
    LOAD = "load"
    SERVICE_DONE = "service-done"


def tie_break(seed: int, factory_id: str, t: int, vehicle_ids: list[str]) -> list[str]:
    """the order in which vehicles arriving at the same factory at the same time queue up"""
    vehicle_ids = sorted(vehicle_ids)
    rng = random.Random(f"{seed}:{factory_id}:{t}:{','.join(vehicle_ids)}")
    rng.shuffle(vehicle_ids)
    return vehicle_ids


class Simulation:
    def __init__(self, instance: Instance):
        self.instance = instance
        self.config = instance.config
        self.network = instance.network
        self.now = 0
        self.epoch = 0
        self.events: list[SimEvent] = []
        self._actions: list = []
        self._sequence = 0

        self.items: dict[str, OrderItem] = {}
        self.items_by_order: dict[str, list[str]] = {}
        self._released: list[str] = []
        self._next_order = 0
        self._delivered_count = 0
        self._total_items = 0
        for order in instance.orders:
            items = explode_order(order, self.config.omega)
            self.items_by_order[order.id] = [i.id for i in items]
            self.items.update((i.id, i) for i in items)
            self._total_items += len(items)

        self.docks = {
            f.id: DockState(factory_id=f.id, dock_count=f.dock_count)
            for f in self.network.factories.values()
        }

        rng = random.Random(self.config.rng_seed)
        factory_ids = sorted(self.network.factories)
        self.vehicles: dict[str, VehicleState] = {}
        for vehicle in instance.fleet:
            factory_id = rng.choice(factory_ids)
            self.vehicles[vehicle.id] = VehicleState(
                vehicle_id=vehicle.id,
                capacity=vehicle.capacity,
                operation_time=vehicle.operation_time,
                position=Parked(factory_id=factory_id, arrive_time=0, leave_time=0),
            )
            self._log(0, EventKind.VEHICLE_ARRIVED, vehicle_id=vehicle.id, factory_id=factory_id)

        self._release_until(0)

    def _log(self, t: int, kind: EventKind, **ids):
        assert len(self.events) == 0 or self.events[-1].time <= t, (self.events[-1], t, kind)
        self.events.append(SimEvent(time=t, kind=kind, **ids))

    def _push(self, t: int, action: _Action, vehicle_id: str, item_id: Optional[str] = None):
        heapq.heappush(self._actions, (t, self._sequence, action, vehicle_id, item_id))
        self._sequence += 1

    def _release_until(self, t: int):
        orders = self.instance.orders
        while self._next_order < len(orders) and orders[self._next_order].creation_time <= t:
            order = orders[self._next_order]
            self._next_order += 1
            self._released.append(order.id)
            self._log(order.creation_time, EventKind.ORDER_RELEASED, order_id=order.id)

    @property
    def all_released(self) -> bool:
        return self._next_order == len(self.instance.orders)

    @property
    def all_delivered(self) -> bool:
        return self._delivered_count == self._total_items

    def _next_release_time(self) -> Optional[int]:
        if self.all_released:
            return None
        return self.instance.orders[self._next_order].creation_time

    # snapshot

    def _allocated_item_ids(self) -> set[str]:
        allocated = set()
        for vs in self.vehicles.values():
            allocated.update(vs.cargo)
            for stop in (vs.committed_stop, vs.destination):
                if stop is not None:
                    allocated.update(stop.pickup_item_ids)
                    allocated.update(stop.delivery_item_ids)
        return allocated

    def _planned_item_ids(self) -> set[str]:
        planned = self._allocated_item_ids()
        for vs in self.vehicles.values():
            for stop in vs.planned_route:
                planned.update(stop.pickup_item_ids)
                planned.update(stop.delivery_item_ids)
        return planned

    def _vehicle_view(self, vs: VehicleState) -> VehicleView:
        position = vs.position
        if isinstance(position, Parked):
            cur, arrive, leave, destination = (
                position.factory_id,
                position.arrive_time,
                position.leave_time,
                None,
            )
        elif isinstance(position, AtFactory):
            cur, arrive, leave, destination = (
                position.factory_id,
                position.arrive_time,
                position.leave_time,
                vs.committed_stop,
            )
        else:
            cur, arrive, leave, destination = None, None, position.departure_time, vs.destination
        return VehicleView(
            vehicle_id=vs.vehicle_id,
            capacity=vs.capacity,
            operation_time=vs.operation_time,
            update_time=self.now,
            cur_factory_id=cur,
            arrive_time=arrive,
            leave_time=leave,
            cargo=tuple(vs.cargo),
            destination=destination,
        )

    def snapshot(self) -> Snapshot:
        allocated = self._allocated_item_ids()
        unallocated = []
        ongoing = []
        completed_orders = 0
        for order_id in self._released:
            items = [self.items[i] for i in self.items_by_order[order_id]]
            if all(i.status is ItemStatus.DELIVERED for i in items):
                completed_orders += 1
                continue
            for item in items:
                if item.status is ItemStatus.DELIVERED:
                    continue
                if item.id in allocated:
                    ongoing.append(item)
                else:
                    unallocated.append(item)
        return Snapshot(
            now=self.now,
            vehicles=tuple(self._vehicle_view(self.vehicles[v.id]) for v in self.instance.fleet),
            unallocated=tuple(unallocated),
            ongoing=tuple(ongoing),
            network=self.network,
            config=self.config,
            completed_orders=completed_orders,
        )

    # dispatch

    def apply_dispatch(self, plan: DispatchPlan) -> list[Violation]:
        """replaces destinations and routes, nothing changes when there are violations"""
        violations = validate_dispatch(self.snapshot(), plan)
        if len(violations) > 0:
            return violations

        for vehicle_id in plan.vehicle_ids:
            vs = self.vehicles[vehicle_id]
            destination = plan.destination(vehicle_id)
            route = list(plan.route(vehicle_id))
            position = vs.position
            if isinstance(position, Parked):
                vs.planned_route = route
                if destination is not None:
                    self._depart(vs, self.now, destination)
            elif isinstance(position, AtFactory):
                vs.planned_route = route
            else:
                vs.destination = replace(
                    vs.destination,
                    pickup_item_ids=destination.pickup_item_ids,
                    delivery_item_ids=destination.delivery_item_ids,
                )
                vs.planned_route = route
        return []

    # movement

    def _current_factory(self, vs: VehicleState) -> str:
        assert not isinstance(vs.position, InTransit), vs
        return vs.position.factory_id

    def _depart(self, vs: VehicleState, t: int, stop: Stop):
        origin = self._current_factory(vs)
        eta = t + self.network.travel_time(origin, stop.factory_id)
        self._log(
            t,
            EventKind.VEHICLE_DEPARTED,
            vehicle_id=vs.vehicle_id,
            factory_id=origin,
            destination_id=stop.factory_id,
        )
        vs.position = InTransit(
            origin_id=origin, destination_id=stop.factory_id, departure_time=t, eta=eta
        )
        vs.destination = replace(stop, arrive_time=eta, leave_time=None)
        vs.committed_stop = None
        self._push(eta, _Action.ARRIVE, vs.vehicle_id)

    def _depart_or_park(self, vs: VehicleState, t: int):
        position = vs.position
        assert isinstance(position, AtFactory), vs
        if len(vs.planned_route) > 0:
            self._depart(vs, t, vs.planned_route.pop(0))
        else:
            vs.position = Parked(
                factory_id=position.factory_id, arrive_time=position.arrive_time, leave_time=t
            )
            vs.committed_stop = None

    def _arrive(self, vs: VehicleState, t: int):
        position = vs.position
        if not isinstance(position, InTransit) or position.eta != t:
            raise SimulationFault(f"{vs.vehicle_id} arrives at {t} but is {position}")
        factory_id = position.destination_id
        self._log(t, EventKind.VEHICLE_ARRIVED, vehicle_id=vs.vehicle_id, factory_id=factory_id)
        vs.position = AtFactory(factory_id=factory_id, arrive_time=t)
        vs.committed_stop = replace(vs.destination, arrive_time=t)
        vs.destination = None

    # docks and service

    def _allocate(self, dock: DockState, t: int):
        while dock.free > 0 and len(dock.queue) > 0:
            vehicle_id = dock.queue.popleft()
            dock.in_use.add(vehicle_id)
            self._start_service(self.vehicles[vehicle_id], t)

    def _start_service(self, vs: VehicleState, t: int):
        position = vs.position
        stop = vs.committed_stop
        assert isinstance(position, AtFactory) and stop is not None, vs
        self._log(t, EventKind.DOCK_ALLOCATED, vehicle_id=vs.vehicle_id, factory_id=stop.factory_id)
        work = sum(self.items[i].unload_time for i in stop.delivery_item_ids) + sum(
            self.items[i].load_time for i in stop.pickup_item_ids
        )
        done = self.config.service_start(t + self.config.dock_approach_time, work)
        for item_id in stop.delivery_item_ids:
            done += self.items[item_id].unload_time
            self._push(done, _Action.DELIVER, vs.vehicle_id, item_id)
        for item_id in stop.pickup_item_ids:
            done += self.items[item_id].load_time
            self._push(done, _Action.LOAD, vs.vehicle_id, item_id)
        self._push(done, _Action.SERVICE_DONE, vs.vehicle_id)
        position.allocated_dock = True
        position.leave_time = done
        vs.committed_stop = replace(stop, leave_time=done)

    def _deliver(self, vs: VehicleState, item_id: str, t: int):
        if len(vs.cargo) == 0 or vs.cargo[-1] != item_id:
            raise SimulationFault(f"{vs.vehicle_id} unloads {item_id} which is not on top")
        vs.cargo.pop()
        item = self.items[item_id]
        if item.status is not ItemStatus.LOADED:
            raise SimulationFault(f"{item_id} is delivered with status {item.status}")
        self.items[item_id] = item.with_status(ItemStatus.DELIVERED)
        self._delivered_count += 1
        self._log(
            t,
            EventKind.ITEM_DELIVERED,
            vehicle_id=vs.vehicle_id,
            factory_id=vs.position.factory_id,
            item_id=item_id,
            order_id=item.order_id,
        )

    def _load(self, vs: VehicleState, item_id: str, t: int):
        item = self.items[item_id]
        if item.status is not ItemStatus.GENERATED:
            raise SimulationFault(f"{item_id} is loaded with status {item.status}")
        vs.cargo.append(item_id)
        if sum(self.items[i].quarters for i in vs.cargo) > to_quarters(vs.capacity):
            raise SimulationFault(f"{vs.vehicle_id} is over capacity after loading {item_id}")
        self.items[item_id] = item.with_status(ItemStatus.LOADED)
        self._log(
            t,
            EventKind.ITEM_LOADED,
            vehicle_id=vs.vehicle_id,
            factory_id=vs.position.factory_id,
            item_id=item_id,
            order_id=item.order_id,
        )

    def _service_done(self, vs: VehicleState, t: int):
        factory_id = vs.position.factory_id
        self.docks[factory_id].in_use.remove(vs.vehicle_id)
        self._log(t, EventKind.SERVICE_DONE, vehicle_id=vs.vehicle_id, factory_id=factory_id)
        self._depart_or_park(vs, t)

    # epochs

    def _process_batch(self, t: int):
        """all actions at time t, arrivals queue up together"""
        arrivals = {}
        while len(self._actions) > 0 and self._actions[0][0] == t:
            _, _, action, vehicle_id, item_id = heapq.heappop(self._actions)
            vs = self.vehicles[vehicle_id]
            if action is _Action.ARRIVE:
                self._arrive(vs, t)
                if vs.committed_stop.is_empty:
                    self._depart_or_park(vs, t)
                else:
                    arrivals.setdefault(vs.position.factory_id, []).append(vehicle_id)
            elif action is _Action.DELIVER:
                self._deliver(vs, item_id, t)
            elif action is _Action.LOAD:
                self._load(vs, item_id, t)
            elif action is _Action.SERVICE_DONE:
                self._service_done(vs, t)
            else:
                assert False, action

        for factory_id, vehicle_ids in sorted(arrivals.items()):
            dock = self.docks[factory_id]
            dock.queue.extend(tie_break(self.config.rng_seed, factory_id, t, vehicle_ids))
        for factory_id in sorted(self.docks):
            self._allocate(self.docks[factory_id], t)

    def _undispatched_overdue(self) -> Optional[str]:
        planned = self._planned_item_ids()
        for order_id in self._released:
            order_items = [self.items[i] for i in self.items_by_order[order_id]]
            waiting = [
                i for i in order_items if i.status is ItemStatus.GENERATED and i.id not in planned
            ]
            if len(waiting) == 0:
                continue
            if self.now - waiting[0].creation_time > self.config.dispatch_deadline:
                return order_id
        return None

    def advance_epoch(self) -> Union[Snapshot, Finished, Aborted]:
        end = self.now + self.config.epoch_length
        while True:
            candidates = []
            if len(self._actions) > 0:
                candidates.append(self._actions[0][0])
            release = self._next_release_time()
            if release is not None:
                candidates.append(release)
            if len(candidates) == 0 or min(candidates) >= end:
                break
            t = min(candidates)
            self._release_until(t)
            self._process_batch(t)

        self._release_until(end)
        self.now = end
        epoch = self.epoch
        self.epoch += 1
        self._log(end, EventKind.EPOCH_BOUNDARY, epoch=epoch)
        logging.debug(
            f"epoch {epoch} done at {end}s, "
            f"{self._delivered_count}/{self._total_items} items delivered"
        )

        if self.all_released and self.all_delivered:
            return Finished(time=end, epoch=epoch)
        overdue = self._undispatched_overdue()
        if overdue is not None:
            return Aborted(
                reason=AbortReason.DISPATCH_DEADLINE,
                time=end,
                epoch=epoch,
                detail=f"order {overdue} was not dispatched within "
                f"{self.config.dispatch_deadline}s",
            )
        if self.epoch >= self.config.max_epochs:
            return Aborted(
                reason=AbortReason.HORIZON_EXCEEDED,
                time=end,
                epoch=epoch,
                detail=f"not finished after {self.epoch} epochs",
            )
        return self.snapshot()


def new_simulation(instance: Instance) -> Simulation:
    return Simulation(instance)


def snapshot(state: Simulation) -> Snapshot:
    return state.snapshot()


def apply_dispatch(state: Simulation, plan: DispatchPlan) -> list[Violation]:
    return state.apply_dispatch(plan)


def advance_epoch(state: Simulation) -> Union[Snapshot, Finished, Aborted]:
    return state.advance_epoch()


@dataclass(frozen=True)
class RunResult:
    status: RunStatus
    report: ScoreReport
    events: list[SimEvent] = field(repr=False)
    violations: list[Violation] = ffield(list)
    detail: str = ""
    epochs: int = 0

    @property
    def finished(self) -> bool:
        return self.status is RunStatus.FINISHED


def _result(
    state: Simulation,
    status: RunStatus,
    violations: Optional[list[Violation]] = None,
    detail: str = "",
) -> RunResult:
    report = score(state.events, state.instance, state.config, status=status.value)
    return RunResult(
        status=status,
        report=report,
        events=list(state.events),
        violations=violations or [],
        detail=detail,
        epochs=state.epoch,
    )


def run_to_completion(
    instance: Instance,
    policy: DispatchPolicy,
    clock: Callable[[], float] = time.monotonic,
) -> RunResult:
    """the snapshot, decide, dispatch and advance loop until the run ends"""
    state = new_simulation(instance)
    limit = instance.config.algorithm_time_limit
    outcome: Union[Snapshot, Finished, Aborted] = state.snapshot()
    try:
        while isinstance(outcome, Snapshot):
            started = clock()
            try:
                plan = policy.decide(outcome)
            except PolicyTimeout as e:
                return _result(state, RunStatus.TIMEOUT, detail=str(e))
            except PolicyProtocolError as e:
                return _result(state, RunStatus.PROTOCOL, detail=str(e))
            except PlanRejected as e:
                return _result(
                    state,
                    RunStatus.VALIDATION,
                    violations=e.violations,
                    detail=f"the policy rejected its own input in round {state.epoch}: {e}",
                )
            elapsed = clock() - started
            if elapsed > limit:
                return _result(
                    state,
                    RunStatus.TIMEOUT,
                    detail=f"round {state.epoch} took {elapsed:.1f}s, the limit is {limit}s",
                )
            violations = state.apply_dispatch(plan)
            if len(violations) > 0:
                for violation in violations[:10]:
                    logging.warning(f"round {state.epoch}: {violation}")
                return _result(
                    state,
                    RunStatus.VALIDATION,
                    violations=violations,
                    detail=f"{len(violations)} violations in round {state.epoch}",
                )
            outcome = state.advance_epoch()
    finally:
        policy.close()

    if isinstance(outcome, Finished):
        return _result(state, RunStatus.FINISHED)
    status = {
        AbortReason.DISPATCH_DEADLINE: RunStatus.DISPATCH_DEADLINE,
        AbortReason.HORIZON_EXCEEDED: RunStatus.HORIZON_EXCEEDED,
    }[outcome.reason]
    return _result(state, status, detail=outcome.detail)
