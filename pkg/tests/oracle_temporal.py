"""Independent reachability oracle for contact schedules.

Earliest-arrival relaxation over time-respecting contact chains: a message
of a given size can cross a contact only if the remaining contact window
fits the full transmission. Intentionally written apart from the routing
code so the two can disagree.
"""

import math


def earliest_delivery(n_nodes, contacts, source, destination, created_at,
                      size):
    """Earliest time the message can reach the destination, or None.

    contacts: iterable of objects with start, end, a, b, bandwidth.
    """
    arrival = {source: created_at}
    # Relax repeatedly; with <= 20 contacts a fixpoint loop is plenty.
    items = sorted(contacts, key=lambda c: (c.start, c.end, c.a, c.b))
    changed = True
    while changed:
        changed = False
        for c in items:
            tx = size / c.bandwidth
            for u, v in ((c.a, c.b), (c.b, c.a)):
                if u not in arrival:
                    continue
                begin = max(c.start, arrival[u])
                finish = begin + tx
                if finish <= c.end + 1e-9:
                    if finish < arrival.get(v, math.inf) - 1e-12:
                        arrival[v] = finish
                        changed = True
    return arrival.get(destination)
