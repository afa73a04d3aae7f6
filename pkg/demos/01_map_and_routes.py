#!/usr/bin/env python3
"""Map layer walkthrough: synthesize a street grid, parse/serialize the
WKT text format, place points of interest and query shortest paths."""

from opposim import (PoiKind, SegmentLayout, parse_map, place_pois,
                     serialize_map, shortest_path, synth_map)

# A desk-scale street network: 500 x 500 m grid with thinned edges.
graph = synth_map(width=500, height=500, grid_step=50, seed=7)
print(f"synthetic map: {graph.num_vertices} vertices, "
      f"{len(graph.edges)} street segments, bounds {graph.bounds}")

# The same graph survives a round trip through the text format used for
# real city extracts (one LINESTRING per street segment).
text = serialize_map(graph)
print("first map lines:")
for line in text.splitlines()[:3]:
    print("   ", line)
reparsed = parse_map(text)
print(f"reparsed: {reparsed.num_vertices} vertices (round trip)")

# Shortest routes are what commuters follow.
path = shortest_path(graph, 0, graph.num_vertices - 1)
print(f"corner-to-corner route: {len(path.vertices)} hops, "
      f"{path.length:.0f} m")

# Points of interest land inside three vertical map segments (B | A | C,
# with overlap bands where the bridge groups D and E live).
layout = SegmentLayout.default(graph.bounds)
pois = place_pois(graph, layout,
                  {PoiKind.HOUSE: 12, PoiKind.OFFICE: 3,
                   PoiKind.EVENING_SPOT: 6, PoiKind.BUS_STOP: 6}, seed=3)
for kind in PoiKind:
    anchors = [p.anchor for p in pois if p.kind is kind]
    print(f"{kind.value:13s}: {len(anchors):2d} placed, e.g. vertices {anchors[:4]}")
office = next(p for p in pois if p.kind is PoiKind.OFFICE)
print(f"offices are {office.extent:.0f} m squares "
      f"({office.extent ** 2:.0f} m^2 of floor area)")
