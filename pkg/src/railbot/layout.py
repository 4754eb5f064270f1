"""Track network model: magnet-landmark vertices, track segments, turntables,
and detachable connectors, plus the JSON layout format and physical validation.

Conventions: lengths in mm, angles in degrees. A segment's incline profile is
sampled for travel A->B; travelling B->A the approach angle at position s is
the A->B angle with its vertical component sign-flipped (i.e. negated).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

GARMENTS = ("upper", "lower", "offbody")
CONNECTOR_KINDS = ("garment_bridge", "offbody_dock", "peer_bridge")

# Physical limits measured on the prototype: tightest rigid semicircle the
# robot can round (convex / concave) and the landmark resolution floor.
MIN_CONVEX_DIAMETER_MM = 39.0
MIN_CONCAVE_DIAMETER_MM = 49.0
MIN_MAGNET_PITCH_MM = 4.0
MAX_TURNTABLE_PORTS = 4
DEFAULT_MAGNET_PITCH_MM = 50.0
DEFAULT_ROTATION_PERIOD_S = 0.4


class LayoutError(Exception):
    """Malformed layout document (syntax or unresolved/duplicate references)."""


@dataclass(frozen=True)
class LandmarkVertex:
    id: int
    label: str
    garment: str
    incline_deg: float = 0.0
    facing_deg: float = 0.0
    arc_anchor: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.garment not in GARMENTS:
            raise LayoutError(f"vertex {self.id}: unknown garment {self.garment!r}")
        if not -180.0 <= self.incline_deg <= 180.0:
            raise LayoutError(f"vertex {self.id}: incline {self.incline_deg} outside [-180, 180]")
        if not 0.0 <= self.facing_deg < 360.0:
            raise LayoutError(f"vertex {self.id}: facing {self.facing_deg} outside [0, 360)")


@dataclass(frozen=True)
class TrackSegment:
    id: int
    endpoints: tuple[int, int]
    length_mm: float
    # (arc position mm, approach angle deg) samples for A->B travel,
    # piecewise-linear in between, first at s=0 and last at s=length.
    incline_profile: tuple[tuple[float, float], ...]
    min_curve: tuple[float, float] = (60.0, 80.0)  # (convex, concave) diameter mm

    def __post_init__(self):
        if self.length_mm <= 0:
            raise LayoutError(f"segment {self.id}: non-positive length")
        prof = self.incline_profile
        if len(prof) < 2 or prof[0][0] != 0.0 or abs(prof[-1][0] - self.length_mm) > 1e-9:
            raise LayoutError(
                f"segment {self.id}: incline profile must cover [0, {self.length_mm}]"
            )
        if any(b[0] <= a[0] for a, b in zip(prof, prof[1:])):
            raise LayoutError(f"segment {self.id}: profile positions not increasing")

    def angle_at(self, s_mm: float, heading_ab: bool = True) -> float:
        """Approach angle at arc position s (s measured from endpoint A)."""
        s = min(max(s_mm, 0.0), self.length_mm)
        prof = self.incline_profile
        for (s0, a0), (s1, a1) in zip(prof, prof[1:]):
            if s <= s1:
                t = 0.0 if s1 == s0 else (s - s0) / (s1 - s0)
                ang = a0 + t * (a1 - a0)
                return ang if heading_ab else -ang
        ang = prof[-1][1]
        return ang if heading_ab else -ang

    def other_end(self, vertex_id: int) -> int:
        a, b = self.endpoints
        if vertex_id == a:
            return b
        if vertex_id == b:
            return a
        raise ValueError(f"vertex {vertex_id} is not an endpoint of segment {self.id}")


@dataclass(frozen=True)
class Turntable:
    id: int
    ports: tuple[tuple[int, float], ...]  # (vertex id, rotor angle deg)
    rotation_period_s: float = DEFAULT_ROTATION_PERIOD_S

    def __post_init__(self):
        angles = [a for _, a in self.ports]
        if len(set(angles)) != len(angles):
            raise LayoutError(f"turntable {self.id}: duplicate port angles")
        if len(self.ports) < 2:
            raise LayoutError(f"turntable {self.id}: needs at least 2 ports")
        # >4 ports is a validation finding, not a construction error

    def port_angle(self, vertex_id: int) -> float | None:
        for vid, angle in self.ports:
            if vid == vertex_id:
                return angle
        return None

    @property
    def port_vertices(self) -> tuple[int, ...]:
        return tuple(vid for vid, _ in self.ports)


@dataclass(frozen=True)
class Connector:
    id: int
    segment: int
    state: str = "attached"
    kind: str = "garment_bridge"

    def __post_init__(self):
        if self.state not in ("attached", "detached"):
            raise LayoutError(f"connector {self.id}: bad state {self.state!r}")
        if self.kind not in CONNECTOR_KINDS:
            raise LayoutError(f"connector {self.id}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class TrackLayout:
    """Immutable track network. Connector state changes live in a separate
    overlay (see routing.ConnectorOverlay) so the layout can be shared freely.
    """

    vertices: dict[int, LandmarkVertex]
    segments: dict[int, TrackSegment]
    turntables: dict[int, Turntable]
    connectors: dict[int, Connector]
    magnet_pitch_mm: float = DEFAULT_MAGNET_PITCH_MM

    def vertex_by_label(self, label: str) -> LandmarkVertex:
        for v in self.vertices.values():
            if v.label == label:
                return v
        raise KeyError(label)

    def turntable_of_port(self, vertex_id: int) -> Turntable | None:
        for tt in self.turntables.values():
            if tt.port_angle(vertex_id) is not None:
                return tt
        return None

    def segments_at(self, vertex_id: int) -> list[TrackSegment]:
        return [s for s in self.segments.values() if vertex_id in s.endpoints]

    def connector_on_segment(self, segment_id: int) -> Connector | None:
        for c in self.connectors.values():
            if c.segment == segment_id:
                return c
        return None

    def poi_labels(self) -> list[str]:
        """On-body labelled points of interest (offbody vertices excluded)."""
        return [v.label for v in self.vertices.values() if v.garment != "offbody"]


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_code(self, code: str) -> list[Violation]:
        return [v for v in self.violations if v.code == code]


# ---------------------------------------------------------------------------
# parsing / serialization

def parse_layout(text: str) -> TrackLayout:
    """Parse a JSON layout document into a fully linked TrackLayout.

    Raises LayoutError with line/position info on syntax errors, and on
    duplicate ids or unresolved cross-references.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"layout syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise LayoutError("layout document must be a JSON object")

    raw_vertices = doc.get("vertices", [])
    if not raw_vertices:
        raise LayoutError("layout has no vertices")

    vertices: dict[int, LandmarkVertex] = {}
    for rv in raw_vertices:
        try:
            orient = rv.get("segment_orientation", {})
            v = LandmarkVertex(
                id=int(rv["id"]),
                label=str(rv["label"]),
                garment=str(rv.get("garment", "upper")),
                incline_deg=float(orient.get("incline_deg", 0.0)),
                facing_deg=float(orient.get("facing_deg", 0.0)),
                arc_anchor=tuple(rv["arc_anchor"]) if rv.get("arc_anchor") is not None else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LayoutError(f"bad vertex entry {rv!r}: {exc}") from exc
        if v.id in vertices:
            raise LayoutError(f"duplicate vertex id {v.id}")
        vertices[v.id] = v

    segments: dict[int, TrackSegment] = {}
    for rs in doc.get("segments", []):
        try:
            seg = TrackSegment(
                id=int(rs["id"]),
                endpoints=(int(rs["endpoints"][0]), int(rs["endpoints"][1])),
                length_mm=float(rs["length_mm"]),
                incline_profile=tuple((float(s), float(a)) for s, a in rs["incline_profile"]),
                min_curve=(
                    float(rs.get("min_curve", {}).get("convex_mm", 60.0)),
                    float(rs.get("min_curve", {}).get("concave_mm", 80.0)),
                ),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise LayoutError(f"bad segment entry {rs!r}: {exc}") from exc
        if seg.id in segments:
            raise LayoutError(f"duplicate segment id {seg.id}")
        for vid in seg.endpoints:
            if vid not in vertices:
                raise LayoutError(f"segment {seg.id} references unknown vertex {vid}")
        segments[seg.id] = seg

    turntables: dict[int, Turntable] = {}
    for rt in doc.get("turntables", []):
        try:
            tt = Turntable(
                id=int(rt["id"]),
                ports=tuple((int(v), float(a)) for v, a in rt["ports"]),
                rotation_period_s=float(rt.get("rotation_period_s", DEFAULT_ROTATION_PERIOD_S)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LayoutError(f"bad turntable entry {rt!r}: {exc}") from exc
        if tt.id in turntables:
            raise LayoutError(f"duplicate turntable id {tt.id}")
        for vid in tt.port_vertices:
            if vid not in vertices:
                raise LayoutError(f"turntable {tt.id} references unknown vertex {vid}")
        turntables[tt.id] = tt

    connectors: dict[int, Connector] = {}
    for rc in doc.get("connectors", []):
        try:
            c = Connector(
                id=int(rc["id"]),
                segment=int(rc["segment"]),
                state=str(rc.get("state", "attached")),
                kind=str(rc.get("kind", "garment_bridge")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise LayoutError(f"bad connector entry {rc!r}: {exc}") from exc
        if c.id in connectors:
            raise LayoutError(f"duplicate connector id {c.id}")
        if c.segment not in segments:
            raise LayoutError(f"connector {c.id} references unknown segment {c.segment}")
        connectors[c.id] = c

    layout = TrackLayout(
        vertices=vertices,
        segments=segments,
        turntables=turntables,
        connectors=connectors,
        magnet_pitch_mm=float(doc.get("magnet_pitch_mm", DEFAULT_MAGNET_PITCH_MM)),
    )
    _check_links(layout)
    return layout


def _check_links(layout: TrackLayout) -> None:
    port_vertices = set()
    for tt in layout.turntables.values():
        port_vertices.update(tt.port_vertices)
    for v in layout.vertices.values():
        if not layout.segments_at(v.id) and v.id not in port_vertices:
            raise LayoutError(f"vertex {v.id} ({v.label}) belongs to no segment or turntable port")


def serialize_layout(layout: TrackLayout) -> str:
    doc = {
        "magnet_pitch_mm": layout.magnet_pitch_mm,
        "vertices": [
            {
                "id": v.id,
                "label": v.label,
                "garment": v.garment,
                "arc_anchor": list(v.arc_anchor) if v.arc_anchor else None,
                "segment_orientation": {"incline_deg": v.incline_deg, "facing_deg": v.facing_deg},
            }
            for v in sorted(layout.vertices.values(), key=lambda v: v.id)
        ],
        "segments": [
            {
                "id": s.id,
                "endpoints": list(s.endpoints),
                "length_mm": s.length_mm,
                "incline_profile": [[p, a] for p, a in s.incline_profile],
                "min_curve": {"convex_mm": s.min_curve[0], "concave_mm": s.min_curve[1]},
            }
            for s in sorted(layout.segments.values(), key=lambda s: s.id)
        ],
        "turntables": [
            {
                "id": t.id,
                "ports": [[v, a] for v, a in t.ports],
                "rotation_period_s": t.rotation_period_s,
            }
            for t in sorted(layout.turntables.values(), key=lambda t: t.id)
        ],
        "connectors": [
            {"id": c.id, "segment": c.segment, "state": c.state, "kind": c.kind}
            for c in sorted(layout.connectors.values(), key=lambda c: c.id)
        ],
    }
    return json.dumps(doc, indent=2)


# ---------------------------------------------------------------------------
# validation

def connected_components(layout: TrackLayout, detached: frozenset[int] = frozenset()) -> list[set[int]]:
    """Vertex components under the current connector states.

    `detached` holds connector ids forced detached; connectors whose stored
    state is "detached" and are not mentioned stay detached too.
    """
    detached_segments = {
        c.segment for c in layout.connectors.values()
        if c.state == "detached" or c.id in detached
    }

    adj: dict[int, set[int]] = {v: set() for v in layout.vertices}
    for s in layout.segments.values():
        if s.id in detached_segments:
            continue
        a, b = s.endpoints
        adj[a].add(b)
        adj[b].add(a)
    for tt in layout.turntables.values():
        ports = tt.port_vertices
        for p in ports:
            adj[p].update(q for q in ports if q != p)

    seen: set[int] = set()
    comps: list[set[int]] = []
    for start in sorted(layout.vertices):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        comps.append(comp)
    return comps


def validate_layout(layout: TrackLayout) -> ValidationReport:
    """Physical-feasibility report. Findings, never exceptions."""
    found: list[Violation] = []
    for s in sorted(layout.segments.values(), key=lambda s: s.id):
        convex, concave = s.min_curve
        if convex < MIN_CONVEX_DIAMETER_MM:
            found.append(Violation(
                "convex_curvature", f"segment {s.id}",
                f"convex curvature {convex:g} mm below the {MIN_CONVEX_DIAMETER_MM:g} mm minimum",
            ))
        if concave < MIN_CONCAVE_DIAMETER_MM:
            found.append(Violation(
                "concave_curvature", f"segment {s.id}",
                f"concave curvature {concave:g} mm below the {MIN_CONCAVE_DIAMETER_MM:g} mm minimum",
            ))
    if layout.magnet_pitch_mm < MIN_MAGNET_PITCH_MM:
        found.append(Violation(
            "magnet_pitch", "layout",
            f"magnet pitch {layout.magnet_pitch_mm:g} mm below the {MIN_MAGNET_PITCH_MM:g} mm resolution floor",
        ))
    for tt in sorted(layout.turntables.values(), key=lambda t: t.id):
        if len(tt.ports) > MAX_TURNTABLE_PORTS:
            found.append(Violation(
                "turntable_ports", f"turntable {tt.id}",
                f"{len(tt.ports)} ports exceeds the {MAX_TURNTABLE_PORTS}-port maximum",
            ))
    comps = connected_components(layout)
    if len(comps) > 1:
        found.append(Violation(
            "disconnected", "layout",
            f"{len(comps)} disconnected components under current connector states",
        ))
    return ValidationReport(tuple(found))


# ---------------------------------------------------------------------------
# built-in generalized body layout

def _seg(sid, a, b, length, profile, curve=(60.0, 80.0)):
    prof = tuple((float(f * length), float(ang)) for f, ang in profile)
    return TrackSegment(id=sid, endpoints=(a, b), length_mm=float(length),
                        incline_profile=prof, min_curve=curve)


# label, garment, (incline, facing), (x, y, z) anchor in mm (y up, x right, z front)
_GENERAL_VERTICES = [
    # left arm (track climbs the hanging arm at +90)
    ("left_wrist", "upper", (90, 0), (-420, 820, 40)),
    ("left_forearm", "upper", (90, 5), (-400, 935, 45)),
    # the track swings outboard around the elbow joint before climbing on
    ("left_elbow", "upper", (66, 336), (-380, 1050, 40)),
    ("left_upper_arm", "upper", (86, 10), (-330, 1165, 30)),
    # crest of the deltoid: the climb eases and the carriage swings behind
    # the joint to meet the rotor port
    ("left_shoulder", "upper", (45, 172), (-230, 1390, 20)),
    # left-shoulder turntable companion ports
    ("left_shoulder_back", "upper", (60, 20), (-200, 1430, -60)),
    ("left_shoulder_chest", "upper", (-40, 350), (-185, 1370, 70)),
    # back chain
    # the blade crossing rolls the carriage to the back-left before the
    # track straightens into the spine descent
    ("upper_back", "upper", (-36, 226), (-120, 1380, -110)),
    ("mid_back", "upper", (-90, 5), (-60, 1190, -130)),
    ("lower_back", "upper", (-90, 0), (-20, 1000, -120)),
    ("tailbone", "upper", (12, 183), (0, 900, -90)),
    # chest, left run toward the chest turntable
    ("left_chest", "upper", (-70, 340), (-140, 1290, 90)),
    ("left_ribs", "upper", (-45, 330), (-95, 1210, 105)),
    ("chest_left", "upper", (-20, 0), (-55, 1300, 110)),
    ("upper_chest", "upper", (-90, 90), (0, 1330, 115)),
    ("chest_right", "upper", (20, 0), (55, 1300, 110)),
    # chest column down the front
    ("sternum", "upper", (-90, 90), (0, 1220, 110)),
    ("lower_chest", "upper", (-90, 90), (0, 1110, 105)),
    ("stomach", "upper", (-90, 90), (0, 1000, 95)),
    ("left_waist", "upper", (0, 80), (-120, 980, 60)),
    ("right_waist", "upper", (0, 280), (120, 980, 60)),
    # right chest run and arm (mirror of the left, no turntable)
    ("right_chest", "upper", (50, 20), (140, 1290, 90)),
    ("right_collar", "upper", (80, 10), (200, 1360, 60)),
    ("right_shoulder", "upper", (90, 0), (230, 1390, 20)),
    ("right_upper_arm", "upper", (-86, 350), (330, 1165, 30)),
    ("right_elbow", "upper", (-68, 335), (380, 1050, 40)),
    ("right_forearm", "upper", (-90, 355), (400, 935, 45)),
    ("right_wrist", "upper", (-90, 0), (420, 820, 40)),
    # pants: waist band and both legs
    ("left_hip", "lower", (-70, 60), (-150, 930, 40)),
    ("pelvis_front", "lower", (0, 90), (0, 920, 80)),
    ("right_hip", "lower", (0, 270), (150, 930, 40)),
    ("pelvis_back", "lower", (0, 270), (0, 915, -85)),
    ("left_upper_thigh", "lower", (-90, 80), (-160, 820, 30)),
    ("left_mid_thigh", "lower", (-90, 80), (-165, 710, 25)),
    ("left_lower_thigh", "lower", (-90, 80), (-165, 600, 25)),
    ("left_knee", "lower", (-60, 70), (-160, 490, 30)),
    ("left_upper_shin", "lower", (-90, 80), (-155, 380, 25)),
    ("left_mid_shin", "lower", (-90, 80), (-150, 280, 20)),
    ("left_lower_shin", "lower", (-90, 80), (-145, 190, 15)),
    ("left_ankle", "lower", (-90, 80), (-140, 110, 10)),
    ("right_upper_thigh", "lower", (-90, 280), (160, 820, 30)),
    ("right_mid_thigh", "lower", (-90, 280), (165, 710, 25)),
    ("right_lower_thigh", "lower", (-90, 280), (165, 600, 25)),
    ("right_knee", "lower", (-60, 290), (160, 490, 30)),
    ("right_upper_shin", "lower", (-90, 280), (155, 380, 25)),
    ("right_mid_shin", "lower", (-90, 280), (150, 280, 20)),
    ("right_lower_shin", "lower", (-90, 280), (145, 190, 15)),
    ("right_ankle", "lower", (-90, 280), (140, 110, 10)),
    # offbody endpoints (docking hanger, peer handoff stub)
    ("key_hanger", "offbody", (0, 0), (-600, 1500, 300)),
    ("peer_wrist", "offbody", (0, 0), (620, 820, 40)),
]


def generalized_layout() -> TrackLayout:
    """Built-in approximation of the full-body track: 48 on-body points of
    interest over both arms, both legs, chest, back and stomach; turntables at
    the left shoulder and upper chest; a garment bridge joining the two
    garments and an offbody dock at the left wrist.

    Geometry (lengths, incline profiles, anchors) is a documented
    approximation chosen to honor the measured anchors - the 460 mm
    wrist-to-shoulder climb at +90 deg among them - not a digitized garment.
    """
    vid = {name: i + 1 for i, (name, *_rest) in enumerate(_GENERAL_VERTICES)}
    vertices = {
        vid[name]: LandmarkVertex(
            id=vid[name], label=name, garment=garment,
            incline_deg=float(orient[0]), facing_deg=float(orient[1]),
            arc_anchor=tuple(float(c) for c in anchor),
        )
        for name, garment, orient, anchor in _GENERAL_VERTICES
    }

    s = vid  # short alias for readability below
    raw_segments = [
        # left arm: 4 x 115 mm = 460 mm; the wrist-to-upper-arm climb stays
        # inside [60, 90] at the table's 115 mm/s floor, then the approach
        # to the shoulder crest eases off it
        (1, s["left_wrist"], s["left_forearm"], 115, [(0.0, 90), (1.0, 90)]),
        (2, s["left_forearm"], s["left_elbow"], 115, [(0.0, 90), (0.52, 80), (1.0, 66)]),
        (3, s["left_elbow"], s["left_upper_arm"], 115, [(0.0, 66), (0.48, 80), (1.0, 86)]),
        (4, s["left_upper_arm"], s["left_shoulder"], 115, [(0.0, 86), (0.5, 66), (1.0, 45)]),
        # back chain over the shoulder crest and down to the tailbone
        (5, s["left_shoulder_back"], s["upper_back"], 170,
         [(0.0, 60), (0.35, 10), (0.7, -22), (1.0, -36)], (45.0, 60.0)),
        (6, s["upper_back"], s["mid_back"], 225, [(0.0, -36), (0.5, -70), (1.0, -90)]),
        (7, s["mid_back"], s["lower_back"], 225, [(0.0, -90), (1.0, -90)]),
        (8, s["lower_back"], s["tailbone"], 110, [(0.0, -90), (0.55, -30), (1.0, 12)], (42.0, 60.0)),
        # chest run from the left-shoulder turntable to the chest turntable
        (9, s["left_shoulder_chest"], s["left_chest"], 100, [(0.0, -40), (1.0, -70)]),
        (10, s["left_chest"], s["left_ribs"], 100, [(0.0, -70), (1.0, -45)]),
        (11, s["left_ribs"], s["chest_left"], 100, [(0.0, -45), (1.0, 20)]),
        # chest column straight down the front
        (12, s["upper_chest"], s["sternum"], 110, [(0.0, -90), (1.0, -90)]),
        (13, s["sternum"], s["lower_chest"], 110, [(0.0, -90), (1.0, -90)]),
        (14, s["lower_chest"], s["stomach"], 110, [(0.0, -90), (1.0, -90)]),
        (15, s["stomach"], s["left_waist"], 120, [(0.0, -30), (1.0, 0)]),
        (16, s["stomach"], s["right_waist"], 120, [(0.0, -30), (1.0, 0)]),
        # right collar run then down the right arm
        (17, s["chest_right"], s["right_chest"], 110, [(0.0, 20), (1.0, 50)]),
        (18, s["right_chest"], s["right_collar"], 110, [(0.0, 50), (1.0, 80)]),
        (19, s["right_collar"], s["right_shoulder"], 100, [(0.0, 80), (1.0, 90)]),
        (20, s["right_shoulder"], s["right_upper_arm"], 115, [(0.0, -90), (1.0, -86)]),
        (21, s["right_upper_arm"], s["right_elbow"], 115, [(0.0, -86), (0.48, -80), (1.0, -68)]),
        (22, s["right_elbow"], s["right_forearm"], 115, [(0.0, -68), (0.52, -80), (1.0, -90)]),
        (23, s["right_forearm"], s["right_wrist"], 115, [(0.0, -90), (1.0, -90)]),
        # waist band loop
        (24, s["left_hip"], s["pelvis_front"], 150, [(0.0, -10), (1.0, 0)]),
        (25, s["pelvis_front"], s["right_hip"], 150, [(0.0, 0), (1.0, 10)]),
        (26, s["left_hip"], s["pelvis_back"], 160, [(0.0, -5), (1.0, 0)]),
        (27, s["pelvis_back"], s["right_hip"], 160, [(0.0, 0), (1.0, 5)]),
        # left leg
        (28, s["left_hip"], s["left_upper_thigh"], 110, [(0.0, -80), (1.0, -90)]),
        (29, s["left_upper_thigh"], s["left_mid_thigh"], 110, [(0.0, -90), (1.0, -90)]),
        (30, s["left_mid_thigh"], s["left_lower_thigh"], 110, [(0.0, -90), (1.0, -90)]),
        (31, s["left_lower_thigh"], s["left_knee"], 110, [(0.0, -90), (1.0, -60)], (45.0, 60.0)),
        (32, s["left_knee"], s["left_upper_shin"], 110, [(0.0, -60), (1.0, -90)], (45.0, 60.0)),
        (33, s["left_upper_shin"], s["left_mid_shin"], 100, [(0.0, -90), (1.0, -90)]),
        (34, s["left_mid_shin"], s["left_lower_shin"], 90, [(0.0, -90), (1.0, -90)]),
        (35, s["left_lower_shin"], s["left_ankle"], 90, [(0.0, -90), (1.0, -90)]),
        # right leg
        (36, s["right_hip"], s["right_upper_thigh"], 110, [(0.0, -80), (1.0, -90)]),
        (37, s["right_upper_thigh"], s["right_mid_thigh"], 110, [(0.0, -90), (1.0, -90)]),
        (38, s["right_mid_thigh"], s["right_lower_thigh"], 110, [(0.0, -90), (1.0, -90)]),
        (39, s["right_lower_thigh"], s["right_knee"], 110, [(0.0, -90), (1.0, -60)], (45.0, 60.0)),
        (40, s["right_knee"], s["right_upper_shin"], 110, [(0.0, -60), (1.0, -90)], (45.0, 60.0)),
        (41, s["right_upper_shin"], s["right_mid_shin"], 100, [(0.0, -90), (1.0, -90)]),
        (42, s["right_mid_shin"], s["right_lower_shin"], 90, [(0.0, -90), (1.0, -90)]),
        (43, s["right_lower_shin"], s["right_ankle"], 90, [(0.0, -90), (1.0, -90)]),
        # garment bridge (upper <-> lower), offbody dock and peer handoff
        (44, s["left_waist"], s["left_hip"], 100, [(0.0, -70), (1.0, -80)]),
        (45, s["left_wrist"], s["key_hanger"], 180, [(0.0, 0), (1.0, 10)]),
        (46, s["right_wrist"], s["peer_wrist"], 180, [(0.0, 0), (1.0, 0)]),
    ]
    segments = {}
    for entry in raw_segments:
        sid, a, b, length, profile = entry[:5]
        curve = entry[5] if len(entry) > 5 else (60.0, 80.0)
        segments[sid] = _seg(sid, a, b, length, profile, curve)

    turntables = {
        1: Turntable(id=1, ports=(
            (s["left_shoulder"], 180.0),
            (s["left_shoulder_back"], 90.0),
            (s["left_shoulder_chest"], 0.0),
        )),
        2: Turntable(id=2, ports=(
            (s["chest_left"], 270.0),
            (s["upper_chest"], 180.0),
            (s["chest_right"], 90.0),
        )),
    }
    connectors = {
        1: Connector(id=1, segment=44, kind="garment_bridge"),
        2: Connector(id=2, segment=45, kind="offbody_dock"),
        3: Connector(id=3, segment=46, kind="peer_bridge"),
    }
    return TrackLayout(
        vertices=vertices, segments=segments,
        turntables=turntables, connectors=connectors,
    )
