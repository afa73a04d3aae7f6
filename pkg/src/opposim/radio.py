"""Infrastructure-mode WiFi connectivity machine.

Every node is an access point, a client of one access point, or in the
idle/scan/rest cycle looking for one. Data moves only across an
established AP-client link. Role changes cost real time (scan, become-AP,
connect), which is where the network build/rebuild delays come from:

    initiate   = t_scan + t_ap + t_scan + t_connect   (no AP anywhere)
    reinitiate = t_scan + t_connect                   (another AP in range)

Channel assignment spreads co-located access points over a small set of
non-overlapping channels; link bandwidth divides by co-channel neighbors
and by the AP's concurrently active transfers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


@dataclass(frozen=True)
class TimingParams:
    t_scan: float = 5.0      # scanning for nearby access points
    t_rest: float = 1.0      # pause between scans
    t_ap: float = 1.0        # assume the AP role
    t_connect: float = 5.0   # attach to an AP as client

    def validate(self) -> None:
        if min(self.t_scan, self.t_rest, self.t_ap, self.t_connect) < 0:
            raise ValueError("timing parameters must be nonnegative")


@dataclass(frozen=True)
class LinkModel:
    base_speed: float = 5_000_000.0   # bytes/s
    range: float = 20.0               # meters
    num_channels: int = 5

    def validate(self) -> None:
        if self.base_speed <= 0 or self.range <= 0 or self.num_channels < 1:
            raise ValueError("bad link model")


def net_initiate_time(t: TimingParams) -> float:
    """Delay until first possible data flow when no AP exists anywhere."""
    return t.t_scan + t.t_ap + t.t_scan + t.t_connect


def net_reinitiate_time(t: TimingParams, ap_available: bool) -> float:
    """Rebuild delay after a network falls apart."""
    if ap_available:
        return t.t_scan + t.t_connect
    return net_initiate_time(t)


class RadioRole(Enum):
    IDLE = "idle"
    SCANNING = "scanning"
    ACCESS_POINT = "access_point"
    CLIENT = "client"


class Phase(Enum):
    IDLE = 0
    SCANNING = 1
    RESTING = 2
    BECOMING_AP = 3
    CONNECTING = 4
    AP = 5
    CLIENT = 6


_PHASE_ROLE = {
    Phase.IDLE: RadioRole.IDLE,
    Phase.RESTING: RadioRole.IDLE,
    Phase.BECOMING_AP: RadioRole.IDLE,
    Phase.CONNECTING: RadioRole.IDLE,
    Phase.SCANNING: RadioRole.SCANNING,
    Phase.AP: RadioRole.ACCESS_POINT,
    Phase.CLIENT: RadioRole.CLIENT,
}


class RadioState:
    """Per-node radio state: coarse role plus transition timers."""

    __slots__ = ("phase", "timer_expiry", "channel", "attached_ap", "clients",
                 "ap_since", "last_client_change", "connect_target",
                 "next_client_scan", "client_scan_due")

    def __init__(self):
        self.phase = Phase.IDLE
        self.timer_expiry = 0.0
        self.channel: Optional[int] = None
        self.attached_ap: Optional[int] = None
        self.clients: Dict[int, None] = {}
        self.ap_since = 0.0
        self.last_client_change = 0.0
        self.connect_target: Optional[int] = None
        self.next_client_scan = 0.0          # next background rescan start
        self.client_scan_due: Optional[float] = None  # pending rescan result time

    @property
    def role(self) -> RadioRole:
        return _PHASE_ROLE[self.phase]

    def reset_to_scan(self, now: float, timing: TimingParams) -> None:
        self.phase = Phase.SCANNING
        self.timer_expiry = now + timing.t_scan
        self.channel = None
        self.attached_ap = None
        self.clients = {}
        self.connect_target = None
        self.client_scan_due = None


@dataclass(frozen=True)
class VisibleAp:
    node_id: int
    estimated_bandwidth: float


def joiner_bandwidth_estimate(link: LinkModel, co_channel_count: int,
                              current_clients: int) -> float:
    """What a prospective client can expect from an AP: the base speed cut
    by co-channel interferers, split as if every client (plus the joiner)
    ran one transfer."""
    return link.base_speed / max(1, co_channel_count) / (current_clients + 1)


def member_bandwidth_estimate(link: LinkModel, co_channel_count: int,
                              current_clients: int) -> float:
    return link.base_speed / max(1, co_channel_count) / max(1, current_clients)


def visible_aps(position: Tuple[float, float],
                candidates: Iterable[Tuple[int, Tuple[float, float], RadioState, int]],
                link: LinkModel) -> List[VisibleAp]:
    """AP-role nodes within communication range, fastest first.

    candidates: (node_id, position, radio_state, co_channel_count) tuples.
    Ties on estimated bandwidth break toward the lowest node id.
    """
    px, py = position
    r2 = link.range * link.range
    out = []
    for node_id, (x, y), state, co_count in candidates:
        if state.phase is not Phase.AP:
            continue
        if (x - px) ** 2 + (y - py) ** 2 <= r2:
            est = joiner_bandwidth_estimate(link, co_count, len(state.clients))
            out.append(VisibleAp(node_id, est))
    out.sort(key=lambda v: (-v.estimated_bandwidth, v.node_id))
    return out


def best_ap(visible: Sequence[VisibleAp]) -> Optional[VisibleAp]:
    return visible[0] if visible else None


def step_radio(state: RadioState, permits_ap: bool,
               visible: Sequence[VisibleAp], now: float,
               timing: TimingParams) -> None:
    """Advance an unconnected node whose phase timer has expired.

    Scan results in hand: connect to the fastest AP, else claim the AP role
    if the routing policy permits it here, else rest and rescan. A node
    finishing its become-AP transition defers to an AP that appeared in the
    meantime, so co-located nodes don't all end up as client-less APs.
    """
    if state.phase in (Phase.IDLE, Phase.RESTING):
        state.phase = Phase.SCANNING
        state.timer_expiry = now + timing.t_scan
        return
    if state.phase is Phase.SCANNING:
        target = best_ap(visible)
        if target is not None:
            state.phase = Phase.CONNECTING
            state.connect_target = target.node_id
            state.timer_expiry = now + timing.t_connect
        elif permits_ap:
            state.phase = Phase.BECOMING_AP
            state.timer_expiry = now + timing.t_ap
        else:
            state.phase = Phase.RESTING
            state.timer_expiry = now + timing.t_rest
        return
    if state.phase is Phase.BECOMING_AP:
        target = best_ap(visible)
        if target is not None:
            state.phase = Phase.CONNECTING
            state.connect_target = target.node_id
            state.timer_expiry = now + timing.t_connect
        else:
            state.phase = Phase.AP
            state.ap_since = now
            state.last_client_change = now
        return
    raise ValueError(f"step_radio called in phase {state.phase}")


def should_switch_ap(current_estimate: float, candidate_estimate: float,
                     ratio: float = 1.25) -> bool:
    """Hysteresis rule for a connected client eyeing a faster AP."""
    return candidate_estimate >= ratio * current_estimate


def ap_due_retirement(state: RadioState, now: float,
                      idle_timeout: float = 60.0,
                      max_duration: float = 600.0) -> bool:
    """An AP steps down after idling without clients or serving too long."""
    if state.phase is not Phase.AP:
        return False
    if not state.clients and now - state.last_client_change >= idle_timeout:
        return True
    return now - state.ap_since >= max_duration


def assign_channel(nearby_channels: Iterable[int], num_channels: int = 5) -> int:
    """Least-loaded channel among nearby APs; ties take the lowest number."""
    loads = {ch: 0 for ch in range(1, num_channels + 1)}
    for ch in nearby_channels:
        if ch in loads:
            loads[ch] += 1
    return min(loads, key=lambda ch: (loads[ch], ch))


def effective_bandwidth(link: LinkModel, co_channel_count: int,
                        active_transfers: int) -> float:
    """Per-transfer rate at an AP: base speed over co-channel APs in range
    (including the AP itself), split equally among its active transfers."""
    return link.base_speed / max(1, co_channel_count) / max(1, active_transfers)
