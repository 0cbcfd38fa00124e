import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_params
from dpdp.config import SimConfig
from dpdp.domain import PalletQuantity
from dpdp.instances import (
    InfeasibleParameters,
    InstanceFormatError,
    format_factory_table,
    format_order_table,
    format_route_table,
    format_vehicle_table,
    generate_instance,
    parse_instance,
    read_instance,
    write_instance,
)

factory_table = """factory_id,longitude,latitude,port_num
A,116.1,39.9,2
B,116.2,39.8,1
"""

route_table = """route_code,start_factory_id,end_factory_id,distance,time
R1,A,B,12.5,900
R2,B,A,13.0,960
"""

vehicle_table = """car_num,capacity,operation_time,gps_id
V_1,15,24,G_1
"""

order_header = (
    "order_id,q_standard,q_small,q_box,demand,creation_time,committed_completion_time,"
    "load_time,unload_time,pickup_id,delivery_id\n"
)


def parse(orders: str, routes: str = route_table):
    return parse_instance(order_header + orders, vehicle_table, routes, factory_table)


def test_parse_small_instance():
    instance = parse(
        "o2,1,2,1,2.25,08:00:00,12:00:00,315,315,A,B\n"
        "o1,2,0,0,2.0,07:00:00,11:00:00,360,360,B,A\n"
    )
    assert [o.id for o in instance.orders] == ["o1", "o2"]
    o2 = instance.order_by_id["o2"]
    assert o2.quantity == PalletQuantity(1, 2, 1)
    assert o2.creation_time == 8 * 3600
    assert o2.load_time == 315
    assert instance.order_by_id["o1"].load_time is None
    assert instance.network.travel_time("B", "A") == 960
    assert instance.network.dock_count("B") == 1
    assert instance.fleet[0].capacity_quarters == 60


def test_committed_time_before_creation_is_next_day():
    instance = parse("o1,1,0,0,1.0,23:00:00,01:00:00,180,180,A,B\n")
    order = instance.orders[0]
    assert order.committed_completion_time - order.creation_time == 2 * 3600


def test_service_times_that_differ_from_omega_are_kept():
    instance = parse("o1,2,0,0,2.0,07:00:00,11:00:00,500,360,A,B\n")
    order = instance.orders[0]
    assert order.load_time == 500
    assert order.unload_time is None


@pytest.mark.parametrize(
    "orders, locus",
    [
        ("o1,1,0,0,2.0,07:00:00,11:00:00,180,180,A,B\n", "orders:2"),
        ("o1,1,0,0,1.0,07:00:00,11:00:00,180,180,A,Z\n", "orders:2"),
        ("o1,x,0,0,1.0,07:00:00,11:00:00,180,180,A,B\n", "orders:2"),
        (
            "o1,1,0,0,1.0,07:00:00,11:00:00,180,180,A,B\n"
            "o1,1,0,0,1.0,07:00:00,11:00:00,180,180,A,B\n",
            "orders:3",
        ),
        ("o1,0,0,0,0.0,07:00:00,11:00:00,0,0,A,B\n", "orders:2"),
        ("o1,1,0,0,1.0,-00:10:00,11:00:00,180,180,A,B\n", "orders:2"),
    ],
)
def test_bad_order_rows_name_their_row(orders, locus):
    with pytest.raises(InstanceFormatError) as e:
        parse(orders)
    assert str(e.value).startswith(locus)


def test_missing_route_is_an_error():
    with pytest.raises(InstanceFormatError) as e:
        parse(
            "o1,1,0,0,1.0,07:00:00,11:00:00,180,180,A,B\n",
            routes="route_code,start_factory_id,end_factory_id,distance,time\nR1,A,B,1,60\n",
        )
    assert e.value.table == "route_map"


def test_missing_column_is_an_error():
    with pytest.raises(InstanceFormatError) as e:
        parse_instance(
            order_header.replace("demand,", "") + "o1,1,0,0,07:00:00,11:00:00,180,180,A,B\n",
            vehicle_table,
            route_table,
            factory_table,
        )
    assert str(e.value).startswith("orders:1")


def test_generator_is_deterministic():
    a = generate_instance(small_params(seed=3))
    b = generate_instance(small_params(seed=3))
    c = generate_instance(small_params(seed=4))
    assert a == b
    assert a != c


def test_generated_tables_are_stable(tmp_path):
    instance = generate_instance(small_params(seed=5))
    write_instance(instance, tmp_path / "one")
    write_instance(read_instance(tmp_path / "one"), tmp_path / "two")
    for name in ("orders.csv", "vehicles.csv", "route_map.csv", "factory_info.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    assert read_instance(tmp_path / "one") == instance


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_generated_instances_are_schema_valid(seed):
    instance = generate_instance(small_params(seed=seed, oversize_rate=0.3))
    config = SimConfig()
    reparsed = parse_instance(
        format_order_table(instance.orders, config),
        format_vehicle_table(instance.fleet),
        format_route_table(instance.network),
        format_factory_table(instance.network),
        config,
    )
    assert reparsed == instance
    for order in instance.orders:
        assert 0 <= order.creation_time < 7200
        assert order.pickup_factory_id != order.delivery_factory_id
        assert order.committed_completion_time > order.creation_time


@settings(max_examples=10, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    asymmetry=st.sampled_from([0.0, 0.1, 0.5]),
)
def test_generated_distances_keep_the_triangle_inequality(seed, asymmetry):
    instance = generate_instance(small_params(seed=seed, factory_count=6, asymmetry=asymmetry))
    network = instance.network
    factory_ids = sorted(network.factories)
    for a in factory_ids:
        for b in factory_ids:
            for c in factory_ids:
                if len({a, b, c}) < 3:
                    continue
                detour = network.distance(a, b) + network.distance(b, c)
                # distances are rounded to 0.1 km
                assert network.distance(a, c) <= (1 + asymmetry) * detour + 0.25


def test_oversize_orders_exceed_the_capacity():
    instance = generate_instance(small_params(seed=1, order_count=30, oversize_rate=1.0))
    assert all(o.quarters > 60 for o in instance.orders)


@pytest.mark.parametrize(
    "changes",
    [
        dict(order_count=0),
        dict(factory_count=1),
        dict(dock_count_range=(3, 2)),
        dict(distance_range=(0.0, 10.0)),
        dict(oversize_rate=1.5),
    ],
)
def test_infeasible_generator_parameters(changes):
    with pytest.raises(InfeasibleParameters):
        generate_instance(small_params(**changes))
