// Payload shapes for the console API and its event stream.

export interface LayoutVertex {
  id: number;
  label: string;
  garment: string;
  /** [x, y, z] mm on the wearer: x lateral, y height, z depth (+front/-back) */
  arc_anchor: [number, number, number];
  segment_orientation: { incline_deg: number; facing_deg: number };
}

export interface LayoutSegment {
  id: number;
  endpoints: [number, number];
  length_mm: number;
  incline_profile: [number, number][];
}

export interface LayoutTurntable {
  id: number;
  ports: [number, number][]; // [vertex id, rotor angle deg]
  rotation_period_s: number;
}

export interface LayoutConnector {
  id: number;
  segment: number;
  state: "attached" | "detached";
  kind: string;
}

export interface LayoutDoc {
  magnet_pitch_mm: number;
  vertices: LayoutVertex[];
  segments: LayoutSegment[];
  turntables: LayoutTurntable[];
  connectors: LayoutConnector[];
}

export type Locus =
  | { kind: "unplaced" }
  | { kind: "vertex"; vertex: number; label: string }
  | { kind: "segment"; segment: number; s_mm: number; heading_ab: boolean }
  | { kind: "turntable"; turntable: number; angle_deg: number };

export interface Snapshot {
  seq: number;
  time: number;
  busy: boolean;
  locus: Locus;
  battery_mah: number;
  slip: string;
  derailed: boolean;
  scenario: string | null;
  controller_position: number | null;
  last_vertex: number | null;
  previous_vertex: number | null;
  plan: { vertices: number[]; expected_s: number } | null;
  [extra: string]: unknown;
}

export interface PlanPayload {
  vertices: { id: number; label: string }[];
  segments: (number | null)[];
  rotations: number[][];
  direction: "FORWARD" | "REVERSED";
  total_length_mm: number;
  expected_s: number;
  frames: number;
}

/** One line of the ndjson event stream. */
export interface StreamEvent {
  seq: number;
  time: number;
  kind: string;
  vertex?: number;
  count?: number;
  fraction?: number;
  arc_mm?: number;
  [extra: string]: unknown;
}

export interface ApiFailure {
  ok: false;
  status: number;
  error: string;
  detail: string;
}

export type ApiResult<T> = ({ ok: true } & T) | ApiFailure;
