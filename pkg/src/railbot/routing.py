"""Shortest-path planning over the track graph, travel-direction resolution,
and turntable rotation planning.

Edge weights are segment lengths in mm. A turntable crossing is a zero-length
hop between two of its port vertices; in a Path it shows up as a None entry in
`segments` so the segment list stays aligned with the vertex pairs.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass

from .layout import TrackLayout


class NoRouteError(Exception):
    def __init__(self, src: int, dst: int):
        super().__init__(f"no route from vertex {src} to vertex {dst} under current connector states")
        self.src = src
        self.dst = dst


class UnknownConnectorError(KeyError):
    pass


class PortMismatchError(Exception):
    """Path claims a turntable hop between vertices that are not its ports."""


class Direction(enum.Enum):
    FORWARD = "forward"
    REVERSED = "reversed"


@dataclass(frozen=True)
class Path:
    # segments[i] joins vertices[i] and vertices[i+1]; None marks a rotor hop
    vertices: tuple[int, ...]
    segments: tuple[int | None, ...]
    total_length_mm: float
    # one entry per rotor hop, in path order: (turntable id, entry deg, exit deg)
    turntable_stops: tuple[tuple[int, float, float], ...]

    def __post_init__(self):
        assert len(self.segments) == len(self.vertices) - 1
        assert len(self.turntable_stops) == sum(1 for s in self.segments if s is None)

    @property
    def hops(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class ConnectorOverlay:
    """Complete current connector state: ids in `detached` are open, every
    other connector is closed. Value-style updates keep planning pure.
    """

    detached: frozenset[int] = frozenset()

    @classmethod
    def from_layout(cls, layout: TrackLayout) -> "ConnectorOverlay":
        return cls(frozenset(c.id for c in layout.connectors.values()
                             if c.state == "detached"))

    def is_attached(self, connector_id: int) -> bool:
        return connector_id not in self.detached


def set_connector(layout: TrackLayout, overlay: ConnectorOverlay,
                  connector_id: int, state: str) -> ConnectorOverlay:
    if connector_id not in layout.connectors:
        raise UnknownConnectorError(connector_id)
    if state not in ("attached", "detached"):
        raise ValueError(f"bad connector state {state!r}")
    if state == "detached":
        return ConnectorOverlay(overlay.detached | {connector_id})
    return ConnectorOverlay(overlay.detached - {connector_id})


def _adjacency(layout: TrackLayout, overlay: ConnectorOverlay):
    """vertex -> sorted list of (neighbor, weight mm, segment id or None, turntable id or None)."""
    closed = {c.segment for c in layout.connectors.values()
              if c.id in overlay.detached}
    adj: dict[int, list[tuple[int, float, int | None, int | None]]] = {
        v: [] for v in layout.vertices
    }
    for s in layout.segments.values():
        if s.id in closed:
            continue
        a, b = s.endpoints
        adj[a].append((b, s.length_mm, s.id, None))
        adj[b].append((a, s.length_mm, s.id, None))
    for tt in layout.turntables.values():
        ports = tt.port_vertices
        for u in ports:
            for w in ports:
                if u != w:
                    adj[u].append((w, 0.0, None, tt.id))
    for v in adj:
        adj[v].sort(key=lambda e: (e[0], e[1], e[2] is None))
    return adj


def shortest_path(layout: TrackLayout, overlay: ConnectorOverlay,
                  src: int, dst: int) -> Path:
    """Minimum-total-length path from src to dst.

    Ties between equal-length paths go to the lexicographically smallest
    vertex-id sequence, which makes planning reproducible run to run.
    """
    if src not in layout.vertices or dst not in layout.vertices:
        raise KeyError(f"unknown vertex in route request: {src} -> {dst}")
    if src == dst:
        return Path((src,), (), 0.0, ())

    adj = _adjacency(layout, overlay)
    # heap keys (dist, vertex path) give both the metric and the tie order
    heap: list[tuple[float, tuple[int, ...], tuple[tuple[int | None, int | None], ...]]] = [
        (0.0, (src,), ())
    ]
    settled: set[int] = set()
    while heap:
        dist, vpath, epath = heapq.heappop(heap)
        here = vpath[-1]
        if here in settled:
            continue
        settled.add(here)
        if here == dst:
            return _assemble(layout, vpath, epath, dist)
        for neighbor, weight, seg_id, tt_id in adj[here]:
            if neighbor not in settled:
                heapq.heappush(
                    heap,
                    (dist + weight, vpath + (neighbor,), epath + ((seg_id, tt_id),)),
                )
    raise NoRouteError(src, dst)


def _assemble(layout: TrackLayout, vpath, epath, dist: float) -> Path:
    segments: list[int | None] = []
    stops: list[tuple[int, float, float]] = []
    for i, (seg_id, tt_id) in enumerate(epath):
        segments.append(seg_id)
        if seg_id is None:
            tt = layout.turntables[tt_id]
            entry = tt.port_angle(vpath[i])
            exit_ = tt.port_angle(vpath[i + 1])
            stops.append((tt_id, entry, exit_))
    return Path(tuple(vpath), tuple(segments), dist, tuple(stops))


def resolve_direction(path: Path, previous_vertex: int | None) -> Direction:
    """Wheel-direction rule: reverse exactly when the previously visited
    vertex appears anywhere in the new path. First-ever move runs forward.
    """
    if previous_vertex is None:
        return Direction.FORWARD
    if previous_vertex in path.vertices:
        return Direction.REVERSED
    return Direction.FORWARD


def minimal_rotation_deg(entry_deg: float, exit_deg: float) -> float:
    """Shortest angular travel between two rotor angles, in [0, 180]."""
    delta = (exit_deg - entry_deg) % 360.0
    return min(delta, 360.0 - delta)


def plan_turntable_rotations(layout: TrackLayout, path: Path) -> list[tuple[int, float, float]]:
    """(turntable id, rotation degrees, rotation seconds) per rotor hop.

    Raises PortMismatchError if a rotor hop's endpoints are not both ports of
    one turntable.
    """
    out: list[tuple[int, float, float]] = []
    stop_iter = iter(path.turntable_stops)
    for i, seg in enumerate(path.segments):
        if seg is not None:
            continue
        u, w = path.vertices[i], path.vertices[i + 1]
        tt_id, entry, exit_ = next(stop_iter)
        tt = layout.turntables.get(tt_id)
        if tt is None or tt.port_angle(u) is None or tt.port_angle(w) is None:
            raise PortMismatchError(
                f"vertices {u}->{w} are not ports of turntable {tt_id}")
        degrees = minimal_rotation_deg(entry, exit_)
        out.append((tt_id, degrees, degrees / 360.0 * tt.rotation_period_s))
    return out
