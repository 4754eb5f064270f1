// Browser bootstrap: wire the API client, the event stream, and the widgets
// together against the page skeleton in index.html.

import { ConsoleApi } from "./api.js";
import { EventStreamClient } from "./stream.js";
import { buildBodyMap } from "./geometry.js";
import { MarkerModel } from "./marker.js";
import { clickGoto, ConnectorPanel, ScenarioPanel } from "./console.js";
import {
  paintHighlight,
  paintMarker,
  renderBanner,
  renderConnectorToggles,
  renderPanel,
  renderScenarioPanel,
  type PanelRefs,
} from "./dom.js";
import type { Panel } from "./geometry.js";

async function boot() {
  const api = new ConsoleApi("");
  const layout = await api.layout();
  const map = buildBodyMap(layout);
  const marker = new MarkerModel(map);
  const scenario = new ScenarioPanel(api);
  const connectors = new ConnectorPanel(api);

  const mapRoot = document.getElementById("body-map")!;
  const scenarioRoot = document.getElementById("scenario-panel")!;
  const connectorRoot = document.getElementById("connector-panel")!;
  const statusNode = document.getElementById("stream-status")!;

  const refs = new Map<Panel, PanelRefs>();
  for (const panel of ["front", "back"] as const) {
    const cell = renderPanel(map, panel, (id) => {
      void rideTo(id);
    });
    const wrap = document.createElement("figure");
    const caption = document.createElement("figcaption");
    caption.textContent = panel === "front" ? "Front" : "Back (mirrored)";
    wrap.append(cell.svg, caption);
    mapRoot.appendChild(wrap);
    refs.set(panel, cell);
  }

  async function rideTo(vertexId: number) {
    const outcome = await clickGoto(api, vertexId);
    renderBanner(mapRoot, outcome.banner);
    paintHighlight(refs, outcome.highlight);
  }

  const stream = new EventStreamClient("", {
    onEvent: (event) => {
      marker.feed(event, performance.now());
      scenario.feed(event);
      renderScenarioPanel(scenarioRoot, scenario.state);
    },
    onGap: () => marker.markGap(),
    onStatus: (status) => {
      statusNode.textContent = status;
      if (status === "live") marker.clearGap();
    },
  });
  stream.start();

  renderScenarioPanel(scenarioRoot, scenario.state);
  renderConnectorToggles(
    connectorRoot,
    layout.connectors,
    (id) => connectors.isDetached(id),
    (id) => {
      void connectors.toggle(id).then(() => {
        renderConnectorToggles(
          connectorRoot,
          layout.connectors,
          (cid) => connectors.isDetached(cid),
          () => undefined,
        );
      });
    },
  );

  for (const [name, button] of [
    ["workout", "run-workout"],
    ["dance_arm_wave", "run-wave"],
  ] as const) {
    document.getElementById(button)?.addEventListener("click", () => {
      void scenario.run(name);
      renderScenarioPanel(scenarioRoot, scenario.state);
    });
  }
  document.getElementById("water-step")?.addEventListener("click", () => {
    void scenario.stepWater();
    renderScenarioPanel(scenarioRoot, scenario.state);
  });

  function frame() {
    paintMarker(refs, marker.at(performance.now()));
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

void boot();
