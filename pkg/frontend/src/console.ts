// Console model: click-to-goto highlighting, connector toggles with
// optimistic rollback, and the scenario panel (faults, wave verdicts,
// water stepper). Pure state; the DOM layer just renders it.

import type { ConsoleApi } from "./api.js";
import type { PlanPayload, StreamEvent } from "./types.js";

export interface PathHighlight {
  vertexIds: number[];
  segmentIds: number[];
  turntableBadge: boolean;
  direction: "FORWARD" | "REVERSED";
  expectedS: number;
  totalLengthMm: number;
}

export function highlightFromPlan(plan: PlanPayload): PathHighlight {
  return {
    vertexIds: plan.vertices.map((v) => v.id),
    segmentIds: plan.segments.filter((s): s is number => s !== null),
    turntableBadge: plan.rotations.length > 0,
    direction: plan.direction,
    expectedS: plan.expected_s,
    totalLengthMm: plan.total_length_mm,
  };
}

export interface GotoOutcome {
  highlight: PathHighlight | null;
  banner: string | null;
}

export async function clickGoto(
  api: ConsoleApi,
  vertexId: number,
): Promise<GotoOutcome> {
  const result = await api.goto(vertexId);
  if (!result.ok) {
    const label =
      result.error === "no_route" ? "No route" : result.error;
    return { highlight: null, banner: `${label}: ${result.detail}` };
  }
  return { highlight: highlightFromPlan(result.plan), banner: null };
}

// --------------------------------------------------------------------------
// connector toggles: optimistic, rolled back if the service refuses

export class ConnectorPanel {
  readonly detached = new Set<number>();

  constructor(private readonly api: ConsoleApi) {}

  seed(detachedIds: number[]): void {
    this.detached.clear();
    for (const id of detachedIds) this.detached.add(id);
  }

  isDetached(id: number): boolean {
    return this.detached.has(id);
  }

  async toggle(id: number): Promise<boolean> {
    const wantDetached = !this.detached.has(id);
    // optimistic flip, per the UI contract
    if (wantDetached) this.detached.add(id);
    else this.detached.delete(id);
    const result = await this.api.connector(
      id,
      wantDetached ? "detached" : "attached",
    );
    if (!result.ok) {
      if (wantDetached) this.detached.delete(id);
      else this.detached.add(id);
      return false;
    }
    this.seed(result.detached);
    return true;
  }
}

// --------------------------------------------------------------------------
// scenario panel

export interface FaultEntry {
  time: number;
  pitchDeg: number;
}

export interface ScenarioPanelState {
  active: string | null;
  faults: FaultEntry[];
  flash: boolean;
  waveVerdict: "pass" | "fail" | null;
  waveReturning: boolean;
  waterCount: number;
  waterGlasses: number;
  waterArcMm: number | null;
}

export class ScenarioPanel {
  state: ScenarioPanelState = {
    active: null,
    faults: [],
    flash: false,
    waveVerdict: null,
    waveReturning: false,
    waterCount: 0,
    waterGlasses: 6,
    waterArcMm: null,
  };

  constructor(private readonly api: ConsoleApi) {}

  /** Runs a scenario to completion; live events still stream in feed(). */
  async run(
    name: string,
    params: Record<string, unknown> = {},
  ): Promise<{ ok: boolean; banner: string | null }> {
    this.state.active = name;
    this.state.faults = [];
    this.state.waveVerdict = null;
    this.state.waveReturning = false;
    const result = await this.api.scenario(name, params);
    this.state.active = null;
    if (!result.ok) {
      return { ok: false, banner: `${result.error}: ${result.detail}` };
    }
    return { ok: true, banner: null };
  }

  /** Water stepper: +1 glass, capped; the ride shows up as WaterDisplay. */
  async stepWater(): Promise<{ ok: boolean; banner: string | null }> {
    const next = Math.min(this.state.waterCount + 1, this.state.waterGlasses);
    return this.run("water_tracker", { count: next });
  }

  feed(event: StreamEvent): void {
    switch (event.kind) {
      case "FormFault": {
        this.state.faults.push({
          time: typeof event.t === "number" ? event.t : event.time,
          pitchDeg:
            typeof event.pitch_deg === "number" ? event.pitch_deg : 0,
        });
        this.state.flash = true;
        break;
      }
      case "WaveFail":
        this.state.waveVerdict = "fail";
        this.state.waveReturning = true;
        break;
      case "WaveReturned":
        this.state.waveReturning = false;
        break;
      case "WavePass":
        this.state.waveVerdict = "pass";
        break;
      case "WaterDisplay": {
        if (typeof event.count === "number") {
          this.state.waterCount = event.count;
        }
        if (typeof event.glasses === "number") {
          this.state.waterGlasses = event.glasses;
        }
        if (typeof event.arc_mm === "number") {
          this.state.waterArcMm = event.arc_mm;
        }
        break;
      }
      default:
        break;
    }
  }

  acknowledgeFlash(): void {
    this.state.flash = false;
  }
}
