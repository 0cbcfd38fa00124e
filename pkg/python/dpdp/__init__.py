"""dynamic pickup and delivery: simulator, instances, scoring and dispatch policies"""
