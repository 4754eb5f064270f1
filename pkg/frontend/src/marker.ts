// Robot marker state. Position events (HallDetect / Arrived) pin the
// robot to a vertex; between the last two of them the rendered marker
// interpolates, so it never sits further from the latest report than
// one magnet pitch (consecutive magnets are one pitch apart).

import type { BodyMapView, Panel, ProjectedVertex } from "./geometry.js";
import type { StreamEvent } from "./types.js";

export const POSITION_EVENT_KINDS = new Set(["HallDetect", "Arrived"]);
export const GLIDE_MS = 350;
export const STALE_AFTER_MS = 3000;
export const JITTER_WINDOW_MS = 300;

export interface MarkerState {
  panel: Panel | null;
  x: number;
  y: number;
  vertex: number | null;
  stale: boolean;
  jitter: boolean;
}

export class MarkerModel {
  private byId: Map<number, ProjectedVertex>;
  private prev: ProjectedVertex | null = null;
  private latest: ProjectedVertex | null = null;
  private latestWallMs = 0;
  private lastEventWallMs = 0;
  private jitterUntilMs = 0;
  private gapOpen = false;

  constructor(map: BodyMapView) {
    this.byId = new Map(map.vertices.map((v) => [v.id, v]));
  }

  feed(event: StreamEvent, nowMs: number): void {
    this.lastEventWallMs = nowMs;
    if (POSITION_EVENT_KINDS.has(event.kind) && event.vertex !== undefined) {
      const here = this.byId.get(event.vertex);
      if (here) {
        if (this.latest?.id !== here.id) {
          this.prev = this.latest;
          this.latest = here;
          this.latestWallMs = nowMs;
        } else {
          this.latestWallMs = nowMs;
        }
      }
    } else if (event.kind === "VibrationTick") {
      this.jitterUntilMs = nowMs + JITTER_WINDOW_MS;
    }
  }

  markGap(): void {
    this.gapOpen = true;
  }

  clearGap(): void {
    this.gapOpen = false;
  }

  at(nowMs: number): MarkerState {
    const stale =
      this.gapOpen ||
      (this.lastEventWallMs > 0 &&
        nowMs - this.lastEventWallMs > STALE_AFTER_MS);
    const jitter = nowMs < this.jitterUntilMs;
    if (!this.latest) {
      return { panel: null, x: 0, y: 0, vertex: null, stale, jitter };
    }
    if (!this.prev || this.prev.panel !== this.latest.panel) {
      // no glide across the panel seam; snap to the reported vertex
      return {
        panel: this.latest.panel,
        x: this.latest.x,
        y: this.latest.y,
        vertex: this.latest.id,
        stale,
        jitter,
      };
    }
    const t = Math.min(
      Math.max((nowMs - this.latestWallMs) / GLIDE_MS, 0),
      1,
    );
    return {
      panel: this.latest.panel,
      x: this.prev.x + (this.latest.x - this.prev.x) * t,
      y: this.prev.y + (this.latest.y - this.prev.y) * t,
      vertex: this.latest.id,
      stale,
      jitter,
    };
  }

  /** Screen-space distance from the marker to the latest reported vertex. */
  deviationFromLatest(nowMs: number): number {
    if (!this.latest) return 0;
    const state = this.at(nowMs);
    return Math.hypot(state.x - this.latest.x, state.y - this.latest.y);
  }
}
