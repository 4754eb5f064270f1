// SVG rendering for the dual-panel body map plus the side panels.
// Thin by design: all decisions live in the models, this file draws them.

import type { BodyMapView, Panel, ProjectedSegment } from "./geometry.js";
import { panelsFor } from "./geometry.js";
import type { MarkerState } from "./marker.js";
import type { PathHighlight, ScenarioPanelState } from "./console.js";
import type { LayoutConnector } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

export interface PanelRefs {
  svg: SVGSVGElement;
  marker: SVGCircleElement;
  segmentNodes: Map<string, SVGLineElement>;
  vertexNodes: Map<number, SVGCircleElement>;
}

export function renderPanel(
  map: BodyMapView,
  panel: Panel,
  onVertexClick: (id: number) => void,
): PanelRefs {
  const svg = el("svg", {
    viewBox: `0 0 ${map.width} ${map.height}`,
    class: `body-panel body-panel-${panel}`,
    role: "img",
  });
  const points = new Map(map.vertices.map((v) => [v.id, v]));
  const segmentNodes = new Map<string, SVGLineElement>();
  const vertexNodes = new Map<number, SVGCircleElement>();

  for (const segment of map.segments) {
    if (!panelsFor(segment).includes(panel)) continue;
    const a = points.get(segment.from);
    const b = points.get(segment.to);
    if (!a || !b) continue;
    const onPanel = (v: typeof a) => v.panel === panel;
    const line = el("line", {
      x1: String(a.x),
      y1: String(a.y),
      x2: String(b.x),
      y2: String(b.y),
      class: segment.crossesSeam ? "track track-seam" : "track",
      "stroke-dasharray": segment.crossesSeam ? "4 4" : "",
    });
    if (!onPanel(a) || !onPanel(b)) line.classList.add("track-partial");
    svg.appendChild(line);
    segmentNodes.set(`${panel}:${segment.id}`, line);
  }

  for (const vertex of map.vertices) {
    if (vertex.panel !== panel) continue;
    const dot = el("circle", {
      cx: String(vertex.x),
      cy: String(vertex.y),
      r: vertex.turntablePort ? "7" : "5",
      class: vertex.offbody
        ? "vertex vertex-offbody"
        : vertex.turntablePort
          ? "vertex vertex-port"
          : "vertex",
      tabindex: "0",
    });
    dot.addEventListener("click", () => onVertexClick(vertex.id));
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = vertex.label;
    dot.appendChild(title);
    svg.appendChild(dot);
    vertexNodes.set(vertex.id, dot);

    const text = el("text", {
      x: String(vertex.x + 9),
      y: String(vertex.y + 4),
      class: "vertex-label",
    });
    text.textContent = vertex.label;
    svg.appendChild(text);
  }

  const marker = el("circle", {
    r: "9",
    class: "robot-marker hidden",
  });
  svg.appendChild(marker);
  return { svg, marker, segmentNodes, vertexNodes };
}

export function paintMarker(refs: Map<Panel, PanelRefs>, state: MarkerState) {
  for (const [panel, { marker }] of refs) {
    if (state.panel !== panel) {
      marker.classList.add("hidden");
      continue;
    }
    marker.classList.remove("hidden");
    marker.setAttribute("cx", String(state.x));
    marker.setAttribute("cy", String(state.y));
    marker.classList.toggle("marker-stale", state.stale);
    marker.classList.toggle("marker-jitter", state.jitter);
  }
}

export function paintHighlight(
  refs: Map<Panel, PanelRefs>,
  highlight: PathHighlight | null,
) {
  for (const { segmentNodes, vertexNodes } of refs.values()) {
    for (const node of segmentNodes.values()) {
      node.classList.remove("track-planned");
    }
    for (const node of vertexNodes.values()) {
      node.classList.remove("vertex-planned");
    }
    if (!highlight) continue;
    for (const key of segmentNodes.keys()) {
      const segId = Number(key.split(":")[1]);
      if (highlight.segmentIds.includes(segId)) {
        segmentNodes.get(key)?.classList.add("track-planned");
      }
    }
    for (const id of highlight.vertexIds) {
      vertexNodes.get(id)?.classList.add("vertex-planned");
    }
  }
}

export function renderBanner(root: HTMLElement, message: string | null) {
  let banner = root.querySelector<HTMLElement>(".banner");
  if (!banner) {
    banner = document.createElement("div");
    banner.className = "banner hidden";
    root.prepend(banner);
  }
  banner.textContent = message ?? "";
  banner.classList.toggle("hidden", message === null);
}

export function renderScenarioPanel(
  root: HTMLElement,
  state: ScenarioPanelState,
) {
  root.querySelector(".scenario-active")!.textContent =
    state.active ?? "idle";
  root
    .querySelector(".scenario-flash")!
    .classList.toggle("flash-on", state.flash);
  const faults = root.querySelector<HTMLElement>(".fault-log")!;
  faults.replaceChildren(
    ...state.faults.map((fault) => {
      const item = document.createElement("li");
      item.textContent = `t=${fault.time.toFixed(2)}s pitch ${fault.pitchDeg.toFixed(1)} deg`;
      return item;
    }),
  );
  const verdict = root.querySelector<HTMLElement>(".wave-verdict")!;
  verdict.textContent = state.waveReturning
    ? "returning to shoulder..."
    : (state.waveVerdict ?? "");
  root.querySelector(".water-count")!.textContent =
    `${state.waterCount} / ${state.waterGlasses}`;
}

export function renderConnectorToggles(
  root: HTMLElement,
  connectors: LayoutConnector[],
  isDetached: (id: number) => boolean,
  onToggle: (id: number) => void,
) {
  const list = root.querySelector<HTMLElement>(".connector-list")!;
  list.replaceChildren(
    ...connectors.map((connector) => {
      const item = document.createElement("li");
      const button = document.createElement("button");
      const detached = isDetached(connector.id);
      button.textContent = `${connector.kind} (#${connector.id}): ${
        detached ? "detached" : "attached"
      }`;
      button.classList.toggle("detached", detached);
      button.addEventListener("click", () => onToggle(connector.id));
      item.appendChild(button);
      return item;
    }),
  );
}
