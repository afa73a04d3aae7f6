#!/usr/bin/env python3
"""Mobility layer walkthrough: one simulated day of 50 working people.

Everyone sleeps at home, leaves at 08:00 by car, bus or on foot, spends
exactly eight hours at the office (wandering inside the office square
between long pauses), and half the time gathers with 1-3 friends at an
evening spot before heading home."""

import heapq
from collections import Counter

from opposim.engine import Simulation
from opposim.mobility import DAY, Activity
from opposim.scenario import load_scenario

sim = Simulation(load_scenario("desk"), seed=11)
model = sim.model
model.log = []

profiles = model.profiles
cars = sum(p.owns_car for p in profiles)
print(f"{len(profiles)} nodes; {cars} own a car; "
      f"{len(model.lines)} bus line(s) with "
      f"{sum(l.vehicles for l in model.lines)} buses")

# Drive the mobility layer alone through one day.
heap = list(model.initial_wakes())
heapq.heapify(heap)
while heap and heap[0][0] <= DAY:
    t, nid = heapq.heappop(heap)
    nxt, extras = model.wake(nid, t)
    if nxt is not None:
        heapq.heappush(heap, (nxt, nid))
    for e in extras:
        heapq.heappush(heap, e)

by_activity = Counter(act for _, _, act in model.log)
print("activity transitions over the day:")
for act, count in sorted(by_activity.items(), key=lambda kv: kv[0].value):
    print(f"   {act.value:18s} {count}")

evening = {nid for _, nid, act in model.log if act is Activity.AT_EVENING_SPOT}
print(f"{len(evening)} nodes visited an evening spot "
      f"(probability 0.5 per day)")

sample = model.log[:6]
print("first transitions (time, node, new activity):")
for t, nid, act in sample:
    print(f"   {t / 3600:5.2f} h  node {nid:2d}  {act.value}")

# Snapshot positions: at 07:59 everyone must still be at their house.
misplaced = [nid for nid in range(len(profiles))
             if model.position(nid, 28740.0)
             != model.nodes[nid].profile.house.position]
print(f"nodes away from home at 07:59: {len(misplaced)} (expect 0)")
