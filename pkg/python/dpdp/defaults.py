import os
from pathlib import Path

interaction_dir = Path(
    os.environ.get("DPDP_INTERACTION_DIR", "./data_interaction")
).expanduser()

# the below are all relative to the interaction dir

vehicle_info = Path("vehicle_info.json")
unallocated_order_items = Path("unallocated_order_items.json")
ongoing_order_items = Path("ongoing_order_items.json")
output_destination = Path("output_destination.json")
output_route = Path("output_route.json")

# the below are all relative to an instance dir

orders = Path("orders.csv")
vehicles = Path("vehicles.csv")
route_map = Path("route_map.csv")
factory_info = Path("factory_info.csv")

# run outputs

event_log = Path("events.jsonl")
report = Path("report.json")

success_token = "SUCCESS"

# exit codes

exit_ok = 0
exit_oracle_failure = 1
exit_usage = 2
exit_deadline = 10
exit_timeout = 11
exit_validation = 12
exit_protocol = 13
exit_horizon = 14
