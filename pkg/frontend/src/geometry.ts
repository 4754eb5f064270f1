// Dual-panel body map projection. Anchors are [x, y, z] mm on the wearer;
// z splits front (>= 0) from back. The back panel is viewed from behind,
// so its x axis mirrors. SVG y grows downward, wearer y grows upward.

import type { LayoutDoc, LayoutSegment, LayoutVertex } from "./types.js";

export type Panel = "front" | "back";

export interface ProjectedVertex {
  id: number;
  label: string;
  panel: Panel;
  x: number;
  y: number;
  offbody: boolean;
  turntablePort: boolean;
}

export interface ProjectedSegment {
  id: number;
  panel: Panel;
  /** Rendered on both panels when its endpoints straddle the seam. */
  crossesSeam: boolean;
  from: number;
  to: number;
}

export interface BodyMapView {
  width: number;
  height: number;
  vertices: ProjectedVertex[];
  segments: ProjectedSegment[];
  magnetPitchMm: number;
}

export function panelOf(vertex: LayoutVertex): Panel {
  return vertex.arc_anchor[2] >= 0 ? "front" : "back";
}

export interface PanelSpace {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
  pad: number;
}

export function panelSpace(doc: LayoutDoc, pad = 40): PanelSpace {
  const xs = doc.vertices.map((v) => v.arc_anchor[0]);
  const ys = doc.vertices.map((v) => v.arc_anchor[1]);
  return {
    minX: Math.min(...xs),
    maxX: Math.max(...xs),
    minY: Math.min(...ys),
    maxY: Math.max(...ys),
    pad,
  };
}

/** Panel-local coordinates: back view mirrors x, y flips to screen-down. */
export function projectVertex(
  vertex: LayoutVertex,
  space: PanelSpace,
): { panel: Panel; x: number; y: number } {
  const [x, y] = vertex.arc_anchor;
  const panel = panelOf(vertex);
  const px = panel === "front" ? x - space.minX : space.maxX - x;
  return { panel, x: px + space.pad, y: space.maxY - y + space.pad };
}

function segmentPanels(
  segment: LayoutSegment,
  byId: Map<number, LayoutVertex>,
): { panel: Panel; crossesSeam: boolean } {
  const a = byId.get(segment.endpoints[0]);
  const b = byId.get(segment.endpoints[1]);
  if (!a || !b) throw new Error(`segment ${segment.id} has unknown endpoint`);
  const pa = panelOf(a);
  const pb = panelOf(b);
  if (pa === pb) return { panel: pa, crossesSeam: false };
  // straddles the silhouette: show it on both sides, dashed
  return { panel: pa, crossesSeam: true };
}

export function buildBodyMap(doc: LayoutDoc): BodyMapView {
  const space = panelSpace(doc);
  const byId = new Map(doc.vertices.map((v) => [v.id, v]));
  const portVertices = new Set(
    doc.turntables.flatMap((tt) => tt.ports.map(([v]) => v)),
  );

  const vertices: ProjectedVertex[] = doc.vertices.map((v) => {
    const { panel, x, y } = projectVertex(v, space);
    return {
      id: v.id,
      label: v.label,
      panel,
      x,
      y,
      offbody: v.garment === "offbody",
      turntablePort: portVertices.has(v.id),
    };
  });

  const segments: ProjectedSegment[] = doc.segments.map((s) => {
    const { panel, crossesSeam } = segmentPanels(s, byId);
    return {
      id: s.id,
      panel,
      crossesSeam,
      from: s.endpoints[0],
      to: s.endpoints[1],
    };
  });

  return {
    width: space.maxX - space.minX + 2 * space.pad,
    height: space.maxY - space.minY + 2 * space.pad,
    vertices,
    segments,
    magnetPitchMm: doc.magnet_pitch_mm,
  };
}

/** Panels a segment renders on (one, or both when it crosses the seam). */
export function panelsFor(segment: ProjectedSegment): Panel[] {
  return segment.crossesSeam ? ["front", "back"] : [segment.panel];
}
