import itertools
from dataclasses import replace

import pytest

from conftest import make_instance, make_order, parked_snapshot, small_params
from dpdp.domain import PalletQuantity
from dpdp.instances import generate_instance
from dpdp.plans import DispatchPlan, Stop
from dpdp.validation import (
    PlanRejected,
    ViolationCode,
    ensure_valid,
    validate_dispatch,
    walk_stops,
)


def codes(violations):
    return {v.code for v in violations}


def test_lifo_four_stops():
    quarters = {"o1-0001": 4, "o2-0001": 4}
    pickups = [
        Stop("Fp1", pickup_item_ids=("o1-0001",)),
        Stop("Fp2", pickup_item_ids=("o2-0001",)),
    ]
    wrong = pickups + [
        Stop("Fd1", delivery_item_ids=("o1-0001",)),
        Stop("Fd2", delivery_item_ids=("o2-0001",)),
    ]
    right = pickups + [
        Stop("Fd2", delivery_item_ids=("o2-0001",)),
        Stop("Fd1", delivery_item_ids=("o1-0001",)),
    ]
    assert codes(walk_stops("V", (), wrong, quarters, 60)) == {ViolationCode.LIFO_VIOLATION}
    assert walk_stops("V", (), right, quarters, 60) == []


def test_capacity_is_checked_after_loading():
    quarters = {"a": 40, "b": 24}
    stops = [Stop("A", pickup_item_ids=("a",)), Stop("B", pickup_item_ids=("b",))]
    violations = walk_stops("V", (), stops, quarters, 60)
    assert codes(violations) == {ViolationCode.CAPACITY_EXCEEDED, ViolationCode.ORPHANED_ITEM}
    assert violations[0].locus == "vehicle V stop 1"


def plan_for(vehicle_id, stops):
    return DispatchPlan(destinations={vehicle_id: stops[0]}, routes={vehicle_id: tuple(stops[1:])})


@pytest.fixture
def two_orders():
    instance = make_instance(
        [
            make_order("o1", "A", "B", PalletQuantity(2)),
            make_order("o2", "A", "C", PalletQuantity(1)),
        ]
    )
    return parked_snapshot(instance)


def test_valid_plan(two_orders):
    plan = plan_for(
        "V_1",
        [
            Stop("A", pickup_item_ids=("o1-0001", "o1-0002", "o2-0001")),
            Stop("C", delivery_item_ids=("o2-0001",)),
            Stop("B", delivery_item_ids=("o1-0002", "o1-0001")),
        ],
    )
    assert validate_dispatch(two_orders, plan) == []
    ensure_valid(two_orders, plan)


def test_unknown_ids_stop_further_checks(two_orders):
    plan = plan_for("V_9", [Stop("Z", pickup_item_ids=("nope",))])
    violations = validate_dispatch(two_orders, plan)
    assert codes(violations) == {ViolationCode.UNKNOWN_ID}
    assert len(violations) == 3
    with pytest.raises(PlanRejected):
        ensure_valid(two_orders, plan)


def test_wrong_factories_and_missing_destination(two_orders):
    plan = DispatchPlan(
        destinations={"V_1": None},
        routes={"V_1": (Stop("B", pickup_item_ids=("o2-0001",)),)},
    )
    assert ViolationCode.MALFORMED_ROUTE in codes(validate_dispatch(two_orders, plan))


def test_split_of_a_small_order(two_orders):
    plan = plan_for(
        "V_1",
        [
            Stop("A", pickup_item_ids=("o1-0001",)),
            Stop("A", pickup_item_ids=("o1-0002",)),
            Stop("B", delivery_item_ids=("o1-0002", "o1-0001")),
        ],
    )
    assert codes(validate_dispatch(two_orders, plan)) == {ViolationCode.ILLEGAL_SPLIT}


def test_duplicate_pickups(two_orders):
    plan = plan_for(
        "V_1",
        [
            Stop("A", pickup_item_ids=("o2-0001", "o2-0001")),
            Stop("C", delivery_item_ids=("o2-0001", "o2-0001")),
        ],
    )
    assert ViolationCode.DUPLICATE_ITEM in codes(validate_dispatch(two_orders, plan))


def test_legal_split_of_an_oversize_order():
    instance = make_instance([make_order("big", "A", "B", PalletQuantity(16, 3, 1))], vehicles=2)
    snapshot = parked_snapshot(instance)
    ids = [i.id for i in snapshot.unallocated]
    first, second = ids[:15], ids[15:]
    plan = DispatchPlan(
        destinations={
            "V_1": Stop("A", pickup_item_ids=tuple(first)),
            "V_2": Stop("A", pickup_item_ids=tuple(second)),
        },
        routes={
            "V_1": (Stop("B", delivery_item_ids=tuple(reversed(first))),),
            "V_2": (Stop("B", delivery_item_ids=tuple(reversed(second))),),
        },
    )
    assert validate_dispatch(snapshot, plan) == []

    over = DispatchPlan(
        destinations={"V_1": Stop("A", pickup_item_ids=tuple(ids))},
        routes={"V_1": (Stop("B", delivery_item_ids=tuple(reversed(ids))),)},
    )
    assert ViolationCode.CAPACITY_EXCEEDED in codes(validate_dispatch(snapshot, over))


def moving(snapshot, vehicle_id, destination, cargo=()):
    views = []
    for view in snapshot.vehicles:
        if view.vehicle_id == vehicle_id:
            view = replace(view, cur_factory_id=None, arrive_time=None, cargo=cargo, destination=destination)
        views.append(view)
    return replace(snapshot, vehicles=tuple(views))


def docked(snapshot, vehicle_id, stop, cargo=()):
    views = []
    for view in snapshot.vehicles:
        if view.vehicle_id == vehicle_id:
            view = replace(view, cur_factory_id=stop.factory_id, cargo=cargo, destination=stop)
        views.append(view)
    return replace(snapshot, vehicles=tuple(views))


def test_in_transit_destination_is_locked(two_orders):
    snapshot = moving(two_orders, "V_1", Stop("A", arrive_time=600))
    elsewhere = plan_for("V_1", [Stop("C", pickup_item_ids=())])
    assert codes(validate_dispatch(snapshot, elsewhere)) == {ViolationCode.DESTINATION_LOCKED}
    omitted = DispatchPlan()
    assert codes(validate_dispatch(snapshot, omitted)) == {ViolationCode.DESTINATION_LOCKED}

    # the lists of a locked destination may still change
    same = plan_for(
        "V_1",
        [Stop("A", pickup_item_ids=("o2-0001",)), Stop("C", delivery_item_ids=("o2-0001",))],
    )
    assert validate_dispatch(snapshot, same) == []


def test_committed_stop_must_be_echoed(two_orders):
    committed = Stop("A", pickup_item_ids=("o2-0001",), arrive_time=0)
    snapshot = docked(two_orders, "V_1", committed)
    echo = plan_for("V_1", [committed, Stop("C", delivery_item_ids=("o2-0001",))])
    assert validate_dispatch(snapshot, echo) == []

    changed = plan_for(
        "V_1",
        [
            Stop("A", pickup_item_ids=("o2-0001", "o1-0001", "o1-0002")),
            Stop("C", delivery_item_ids=("o2-0001",)),
        ],
    )
    assert ViolationCode.LIST_COMMITTED in codes(validate_dispatch(snapshot, changed))


def test_committed_item_cannot_move_to_another_vehicle():
    instance = make_instance([make_order("o1", "A", "B")], vehicles=2)
    snapshot = parked_snapshot(instance)
    committed = Stop("A", pickup_item_ids=("o1-0001",), arrive_time=0)
    snapshot = docked(snapshot, "V_1", committed)
    plan = DispatchPlan(
        destinations={
            "V_1": committed,
            "V_2": Stop("A", pickup_item_ids=("o1-0001",)),
        },
        routes={
            "V_1": (Stop("B", delivery_item_ids=("o1-0001",)),),
            "V_2": (Stop("B", delivery_item_ids=("o1-0001",)),),
        },
    )
    assert ViolationCode.LIST_COMMITTED in codes(validate_dispatch(snapshot, plan))


def test_partly_served_committed_stop_is_not_loaded_twice(two_orders):
    committed = Stop("A", pickup_item_ids=("o1-0001", "o1-0002"), arrive_time=0)
    snapshot = docked(two_orders, "V_1", committed, cargo=("o1-0001",))
    plan = plan_for("V_1", [committed, Stop("B", delivery_item_ids=("o1-0002", "o1-0001"))])
    assert validate_dispatch(snapshot, plan) == []


# exhaustive comparison on small instances


def feasible_by_enumeration(sequence, items_of, quarters_of, capacity):
    """a sequence of (kind, order) visits, checked with a plain stack"""
    stack = []
    load = 0
    picked = set()
    for kind, order_id in sequence:
        if kind == "P":
            stack.extend(items_of[order_id])
            load += quarters_of[order_id]
            picked.add(order_id)
            if load > capacity:
                return False
        else:
            if order_id not in picked:
                return False
            for item_id in reversed(items_of[order_id]):
                if len(stack) == 0 or stack[-1] != item_id:
                    return False
                stack.pop()
            load -= quarters_of[order_id]
    return True


def stops_of(sequence, snapshot, items_of):
    stops = []
    for kind, order_id in sequence:
        first = snapshot.items[items_of[order_id][0]]
        if kind == "P":
            stops.append(Stop(first.pickup_factory_id, pickup_item_ids=tuple(items_of[order_id])))
        else:
            stops.append(
                Stop(
                    first.delivery_factory_id,
                    delivery_item_ids=tuple(reversed(items_of[order_id])),
                )
            )
    return stops


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_validator_agrees_with_enumeration(seed):
    instance = generate_instance(
        small_params(
            seed=seed,
            factory_count=3,
            vehicle_count=2,
            order_count=3,
            capacity=3,
            max_standard=2,
            max_small=1,
            max_box=1,
            oversize_rate=0.0,
        )
    )
    snapshot = parked_snapshot(instance, at=sorted(instance.network.factories)[0])
    items_of = {}
    for item in snapshot.unallocated:
        items_of.setdefault(item.order_id, []).append(item.id)
    quarters_of = {o.id: o.quarters for o in instance.orders}
    order_ids = sorted(items_of)
    vehicle_ids = [v.id for v in instance.fleet]
    capacity = instance.fleet[0].capacity_quarters

    checked = 0
    for owners in itertools.product([None, *vehicle_ids], repeat=len(order_ids)):
        sequences_by_vehicle = []
        for vehicle_id in vehicle_ids:
            mine = [o for o, owner in zip(order_ids, owners) if owner == vehicle_id]
            visits = [(k, o) for o in mine for k in ("P", "D")]
            sequences_by_vehicle.append(
                [(vehicle_id, list(p)) for p in itertools.permutations(visits)]
                if len(visits) > 0
                else [(vehicle_id, [])]
            )
        for combination in itertools.product(*sequences_by_vehicle):
            destinations, routes = {}, {}
            expected = True
            for vehicle_id, sequence in combination:
                if len(sequence) == 0:
                    continue
                stops = stops_of(sequence, snapshot, items_of)
                destinations[vehicle_id] = stops[0]
                routes[vehicle_id] = tuple(stops[1:])
                expected = expected and feasible_by_enumeration(
                    sequence, items_of, quarters_of, capacity
                )
            plan = DispatchPlan(destinations=destinations, routes=routes)
            verdict = validate_dispatch(snapshot, plan) == []
            assert verdict == expected, (owners, combination)
            checked += 1
    assert checked > 100
