from __future__ import annotations

import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import pytest

from dpdp.config import SimConfig
from dpdp.domain import (
    Edge,
    Factory,
    ItemStatus,
    Order,
    PalletQuantity,
    RoadNetwork,
    Vehicle,
    explode_order,
)
from dpdp.instances import GeneratorParams, Instance, generate_instance
from dpdp.snapshots import Snapshot, VehicleView

python_root = Path(__file__).resolve().parents[1]


def make_network(
    docks: dict[str, int], distance: float = 10.0, travel_time: int = 600
) -> RoadNetwork:
    factories = {
        factory_id: Factory(id=factory_id, longitude=116.0, latitude=39.9, dock_count=count)
        for factory_id, count in docks.items()
    }
    edges = {
        (a, b): Edge(distance=distance, travel_time=travel_time)
        for a in factories
        for b in factories
        if a != b
    }
    return RoadNetwork(factories=factories, edges=edges)


def make_order(
    order_id: str,
    pickup: str = "A",
    delivery: str = "B",
    quantity: PalletQuantity = PalletQuantity(1),
    creation_time: int = 0,
    committed_completion_time: int = 14400,
) -> Order:
    return Order(
        id=order_id,
        pickup_factory_id=pickup,
        delivery_factory_id=delivery,
        quantity=quantity,
        creation_time=creation_time,
        committed_completion_time=committed_completion_time,
    )


def make_instance(
    orders: list[Order],
    vehicles: int = 1,
    capacity: int = 15,
    network: Optional[RoadNetwork] = None,
    config: Optional[SimConfig] = None,
) -> Instance:
    network = network or make_network({"A": 2, "B": 2, "C": 2})
    fleet = tuple(
        Vehicle(id=f"V_{i}", capacity=Fraction(capacity), gps_id=f"G_{i}")
        for i in range(1, vehicles + 1)
    )
    orders = sorted(orders, key=lambda o: (o.creation_time, o.id))
    return Instance(
        network=network, fleet=fleet, orders=tuple(orders), config=config or SimConfig()
    )


def parked_snapshot(instance: Instance, at: str = "A", now: int = 0) -> Snapshot:
    """every order released and waiting, every vehicle parked at one factory"""
    items = [
        item.with_status(ItemStatus.GENERATED)
        for order in instance.orders
        for item in explode_order(order, instance.config.omega)
    ]
    vehicles = tuple(
        VehicleView(
            vehicle_id=v.id,
            capacity=v.capacity,
            operation_time=v.operation_time,
            update_time=now,
            cur_factory_id=at,
            arrive_time=0,
            leave_time=0,
            cargo=(),
            destination=None,
        )
        for v in instance.fleet
    )
    return Snapshot(
        now=now,
        vehicles=vehicles,
        unallocated=tuple(items),
        ongoing=(),
        network=instance.network,
        config=instance.config,
    )


def small_params(seed: int = 0, **changes) -> GeneratorParams:
    params = dict(
        factory_count=4,
        vehicle_count=3,
        order_count=10,
        horizon=7200,
        committed_lead_time=14400,
        seed=seed,
    )
    params.update(changes)
    return GeneratorParams(**params)


@pytest.fixture
def small_instance() -> Instance:
    return generate_instance(small_params(seed=7))


@pytest.fixture
def tiny_instance() -> Instance:
    return make_instance(
        [
            make_order("o1", "A", "B", PalletQuantity(2), 0, 14400),
            make_order("o2", "B", "C", PalletQuantity(1, 1, 1), 300, 14400),
        ],
        vehicles=2,
    )


@pytest.fixture
def dpdp_env(monkeypatch):
    """child processes can import the package"""
    monkeypatch.setenv("PYTHONPATH", str(python_root))
    return sys.executable
