import itertools

import pytest

from conftest import make_instance, make_network, make_order, small_params
from dpdp.config import SimConfig
from dpdp.domain import ItemStatus, PalletQuantity
from dpdp.event_log import EventKind
from dpdp.instances import generate_instance
from dpdp.scoring import replay_score
from dpdp.plans import DispatchPlan, Stop
from dpdp.policies import GreedyPolicy, IdlePolicy, PolicyProtocolError
from dpdp.simulator import (
    AbortReason,
    Aborted,
    Finished,
    RunStatus,
    advance_epoch,
    apply_dispatch,
    new_simulation,
    run_to_completion,
    snapshot,
    tie_break,
)
from dpdp.snapshots import Snapshot, VehicleMode
from dpdp.validation import PlanRejected, Violation, ViolationCode, validate_dispatch


def drive(instance, policy):
    state = new_simulation(instance)
    outcome = snapshot(state)
    while isinstance(outcome, Snapshot):
        assert apply_dispatch(state, policy.decide(outcome)) == []
        outcome = advance_epoch(state)
    return state, outcome


@pytest.mark.parametrize(
    "creation_time, epoch, time",
    [(0, 24, 15000), (100, 24, 15000), (700, 25, 15600)],
)
def test_undispatched_order_aborts_the_run(creation_time, epoch, time):
    instance = make_instance([make_order("o1", creation_time=creation_time, committed_completion_time=20000)])
    _, outcome = drive(instance, IdlePolicy())
    assert isinstance(outcome, Aborted)
    assert outcome.reason is AbortReason.DISPATCH_DEADLINE
    assert outcome.epoch == epoch
    assert outcome.time == time

    result = run_to_completion(instance, IdlePolicy())
    assert result.status is RunStatus.DISPATCH_DEADLINE
    assert result.report.orders_completed == 0


def zero_travel_instance(seed: int):
    return make_instance(
        [make_order("o1", "A", "B"), make_order("o2", "A", "B")],
        vehicles=2,
        network=make_network({"A": 1, "B": 1}, distance=0.0, travel_time=0),
        config=SimConfig(rng_seed=seed),
    )


def both_to_a(state):
    plan = DispatchPlan(
        destinations={
            "V_1": Stop("A", pickup_item_ids=("o1-0001",)),
            "V_2": Stop("A", pickup_item_ids=("o2-0001",)),
        },
        routes={
            "V_1": (Stop("B", delivery_item_ids=("o1-0001",)),),
            "V_2": (Stop("B", delivery_item_ids=("o2-0001",)),),
        },
    )
    assert apply_dispatch(state, plan) == []
    while isinstance(advance_epoch(state), Snapshot):
        pass
    return state.events


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_simultaneous_arrivals_queue_by_seeded_tie_break(seed):
    events = both_to_a(new_simulation(zero_travel_instance(seed)))
    docked = [e for e in events if e.kind is EventKind.DOCK_ALLOCATED and e.factory_id == "A"]
    first, second = tie_break(seed, "A", 0, ["V_2", "V_1"])
    assert [e.vehicle_id for e in docked] == [first, second]
    assert docked[0].time == 0
    # one dock, the second vehicle waits for the first to finish
    done = [e for e in events if e.kind is EventKind.SERVICE_DONE and e.vehicle_id == first]
    assert docked[1].time == done[0].time == 1800 + 180

    assert both_to_a(new_simulation(zero_travel_instance(seed))) == events


def test_tie_break_depends_only_on_the_set():
    assert tie_break(5, "F", 60, ["b", "a", "c"]) == tie_break(5, "F", 60, ["c", "b", "a"])
    assert sorted(tie_break(5, "F", 60, ["b", "a", "c"])) == ["a", "b", "c"]


def test_greedy_finishes(small_instance):
    result = run_to_completion(small_instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED
    assert result.report.complete
    assert result.report.orders_completed == len(small_instance.orders)
    delivered = [e for e in result.events if e.kind is EventKind.ITEM_DELIVERED]
    assert len(delivered) == sum(len(o.quantity.pallet_types()) for o in small_instance.orders)


def test_greedy_finishes_with_oversize_orders():
    instance = generate_instance(small_params(seed=21, order_count=6, oversize_rate=1.0))
    assert all(o.quarters > 60 for o in instance.orders)
    result = run_to_completion(instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED


def test_greedy_finishes_a_full_day_at_scale():
    instance = generate_instance(
        small_params(seed=4, factory_count=30, vehicle_count=50, order_count=1000, horizon=86400)
    )
    result = run_to_completion(instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED, result.detail
    assert result.report.orders_completed == 1000


def test_loose_deadlines_have_no_timeouts():
    instance = generate_instance(
        small_params(
            seed=2,
            factory_count=5,
            vehicle_count=10,
            order_count=20,
            distance_range=(5.0, 20.0),
            committed_lead_time=40000,
        )
    )
    result = run_to_completion(instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED
    assert result.report.f1 == 0


def test_runs_are_deterministic():
    params = small_params(seed=9, factory_count=2, vehicle_count=4, order_count=15, dock_count_range=(1, 1))
    a = run_to_completion(generate_instance(params), GreedyPolicy())
    b = run_to_completion(generate_instance(params), GreedyPolicy())
    assert a.events == b.events
    assert a.report == b.report


def test_event_log_is_ordered(small_instance):
    result = run_to_completion(small_instance, GreedyPolicy())
    times = [e.time for e in result.events]
    assert times == sorted(times)
    epochs = [e.epoch for e in result.events if e.kind is EventKind.EPOCH_BOUNDARY]
    assert epochs == list(range(len(epochs)))


def test_snapshots_partition_items_and_statuses_only_advance(small_instance):
    state = new_simulation(small_instance)
    policy = GreedyPolicy()
    statuses = {}
    outcome = snapshot(state)
    while isinstance(outcome, Snapshot):
        unallocated = {i.id for i in outcome.unallocated}
        ongoing = {i.id for i in outcome.ongoing}
        assert unallocated.isdisjoint(ongoing)
        for item in (*outcome.unallocated, *outcome.ongoing):
            assert item.status is not ItemStatus.DELIVERED
            assert item.status >= statuses.get(item.id, ItemStatus.GENERATED)
            statuses[item.id] = item.status
        for view in outcome.vehicles:
            assert set(view.cargo) <= ongoing
        apply_dispatch(state, policy.decide(outcome))
        outcome = advance_epoch(state)
    assert isinstance(outcome, Finished)


def test_rejected_plan_changes_nothing(tiny_instance):
    state = new_simulation(tiny_instance)
    before = snapshot(state)
    plan = DispatchPlan(destinations={"V_1": Stop("A", pickup_item_ids=("o1-0001",))})
    violations = apply_dispatch(state, plan)
    assert len(violations) > 0
    assert snapshot(state) == before


class BrokenPolicy(GreedyPolicy):
    def decide(self, snapshot):
        return DispatchPlan(destinations={"V_1": Stop("A", pickup_item_ids=("unknown",))})


class FailingPolicy(GreedyPolicy):
    def decide(self, snapshot):
        raise PolicyProtocolError("no output")


def test_policy_failures_end_the_run(tiny_instance):
    result = run_to_completion(tiny_instance, BrokenPolicy())
    assert result.status is RunStatus.VALIDATION
    assert len(result.violations) > 0
    assert result.report.status == "validation"

    assert run_to_completion(tiny_instance, FailingPolicy()).status is RunStatus.PROTOCOL


def test_slow_rounds_time_out(tiny_instance):
    ticks = itertools.count(step=1000)
    result = run_to_completion(tiny_instance, GreedyPolicy(), clock=lambda: next(ticks))
    assert result.status is RunStatus.TIMEOUT


def test_docking_waits_for_the_work_shift():
    config = SimConfig(work_shifts=((8 * 3600, 18 * 3600),))
    instance = make_instance([make_order("o1", committed_completion_time=40000)], config=config)
    result = run_to_completion(instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED
    loaded = [e for e in result.events if e.kind is EventKind.ITEM_LOADED]
    assert loaded[0].time >= 8 * 3600


def twelve_pallets(config=None):
    return make_instance(
        [make_order("o1", "A", "B", PalletQuantity(12), committed_completion_time=40000)],
        network=make_network({"A": 1, "B": 1}),
        config=config,
    )


def test_epoch_boundary_during_unloading():
    instance = twelve_pallets()
    state = new_simulation(instance)
    policy = GreedyPolicy()
    echoed = 0
    outcome = snapshot(state)
    while isinstance(outcome, Snapshot):
        view = outcome.vehicle_by_id["V_1"]
        if view.mode is VehicleMode.AT_FACTORY and view.cur_factory_id == "B":
            delivered = set(view.destination.delivery_item_ids) - set(outcome.items)
            if len(delivered) > 0:
                plan = DispatchPlan(destinations={"V_1": view.destination})
                assert validate_dispatch(outcome, plan) == []
                echoed += 1
        assert apply_dispatch(state, policy.decide(outcome)) == []
        outcome = advance_epoch(state)
    assert isinstance(outcome, Finished)
    assert echoed > 0

    result = run_to_completion(instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED
    assert replay_score(result.events, instance) == result.report


def test_service_does_not_run_past_the_end_of_a_shift():
    # loading twelve pallets takes 2160s, more than what is left of the first shift
    config = SimConfig(work_shifts=((0, 2500), (7200, 86400)))
    instance = twelve_pallets(config)
    result = run_to_completion(instance, GreedyPolicy())
    assert result.status is RunStatus.FINISHED
    loaded = [e for e in result.events if e.kind is EventKind.ITEM_LOADED]
    assert loaded[0].time == 7200 + 180
    assert loaded[-1].time == 7200 + 12 * 180
    for event in result.events:
        if event.kind is EventKind.SERVICE_DONE:
            assert config.in_shift(event.time - 1)
    assert replay_score(result.events, instance) == result.report


class SelfRejectingPolicy(GreedyPolicy):
    def decide(self, snapshot):
        raise PlanRejected([Violation(ViolationCode.UNKNOWN_ID, "vehicle V_1", "unknown vehicle")])


def test_rejected_policy_input_ends_the_run(tiny_instance):
    result = run_to_completion(tiny_instance, SelfRejectingPolicy())
    assert result.status is RunStatus.VALIDATION
    assert [v.code for v in result.violations] == [ViolationCode.UNKNOWN_ID]
    assert result.report.status == "validation"
