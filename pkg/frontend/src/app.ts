/**
 * Browser entry point. Fetches the network artifacts once at startup,
 * keeps a single immutable ViewState, and re-renders panels whose inputs
 * changed. All server data is read-only except the stateless preview POST.
 */

import { ApiError, PlannerApi } from "./api";
import type { Communities, Flows, GraphGeojson, GraphSummary } from "./api";
import { renderCommunityDetail, renderLegend, renderMap } from "./map";
import { renderDayClassPicker, renderFlowMatrix, renderFlowSummary } from "./flows";
import { renderStagedList, renderTrajectory } from "./trajectory";
import {
  applyPreview,
  clearStaged,
  initialState,
  moveStep,
  setDayClass,
  stagePair,
  toggleCommunity,
  unstagePair,
  type Pair,
  type ViewState,
} from "./state";

type Loaded = {
  summary: GraphSummary;
  graph: GraphGeojson;
  communities: Communities;
  flows: Flows;
};

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing container #${id}`);
  return node;
}

function digestsAgree(data: Loaded): boolean {
  const d = data.summary.manifest_digest;
  return (
    data.graph.manifest_digest === d &&
    data.communities.manifest_digest === d &&
    data.flows.manifest_digest === d
  );
}

export class App {
  private state: ViewState;
  private data: Loaded | null = null;
  private previewInFlight = false;

  constructor(private api: PlannerApi) {
    this.state = initialState();
  }

  async start(): Promise<void> {
    try {
      const [summary, graph, communities, flows] = await Promise.all([
        this.api.graphSummary(),
        this.api.graphGeojson(),
        this.api.communities(),
        this.api.allFlows(),
      ]);
      this.data = { summary, graph, communities, flows };
    } catch (err) {
      el("banner").innerHTML =
        `<p class="error">planner service unreachable: ${String(err)}</p>`;
      return;
    }
    if (!this.state.dayClass || !this.data.flows.day_classes[this.state.dayClass]) {
      const first = Object.keys(this.data.flows.day_classes)[0];
      if (first) this.state = setDayClass(this.state, first);
    }
    this.renderStatic();
    this.renderAll();
    this.bind();
  }

  private renderStatic(): void {
    const d = this.data!;
    const m = d.summary.giant_metrics;
    const note = digestsAgree(d)
      ? ""
      : ` <span class="error">endpoints disagree on the artifact digest; restart the service</span>`;
    el("banner").innerHTML =
      `<p>${d.summary.giant_size} stops in the giant component ` +
      `(${(d.summary.coverage * 100).toFixed(1)}% of ${d.summary.node_count}), ` +
      `${d.summary.edge_count} service links · path length ${m.avg_path_length.toFixed(2)}, ` +
      `eccentricity ${m.avg_eccentricity.toFixed(2)}, diameter ${m.diameter} · ` +
      `artifacts <code>${d.summary.manifest_digest.slice(0, 12)}</code>${note}</p>`;
  }

  private renderAll(): void {
    const d = this.data!;
    const mapModel = {
      graph: d.graph,
      communities: d.communities,
      selected: this.state.selectedCommunities,
      view: { width: 720, height: 560, pad: 24 },
    };
    el("map").innerHTML = renderMap(mapModel);
    el("legend").innerHTML = renderLegend(mapModel);
    el("day-picker").innerHTML = renderDayClassPicker(d.flows, this.state.dayClass);
    el("matrix").innerHTML = renderFlowMatrix({
      flows: d.flows,
      dayClass: this.state.dayClass,
      staged: this.state.staged,
    });
    const entry = d.flows.day_classes[this.state.dayClass];
    el("flow-summary").innerHTML = entry ? renderFlowSummary(entry) : "";
    el("staged").innerHTML = renderStagedList(this.state);
    el("preview").innerHTML = this.state.preview
      ? renderTrajectory(this.state.preview, !this.state.previewFresh)
      : `<p class="empty">stage links and press preview</p>`;
    (el("run-preview") as HTMLButtonElement).disabled =
      this.state.staged.length === 0 || this.previewInFlight;
  }

  private bind(): void {
    el("legend").addEventListener("click", (ev) => {
      const btn = (ev.target as HTMLElement).closest<HTMLElement>("[data-community]");
      if (!btn) return;
      this.state = toggleCommunity(this.state, Number(btn.dataset["community"]));
      this.renderAll();
    });
    el("map").addEventListener("mouseover", (ev) => {
      const stop = (ev.target as HTMLElement).closest<HTMLElement>("[data-community]");
      if (!stop || !this.data) return;
      const id = Number(stop.dataset["community"]);
      if (id >= 0) {
        el("detail").innerHTML = renderCommunityDetail(
          { graph: this.data.graph, communities: this.data.communities, selected: [], view: { width: 0, height: 0, pad: 0 } },
          id,
        );
      }
    });
    el("day-picker").addEventListener("click", (ev) => {
      const btn = (ev.target as HTMLElement).closest<HTMLElement>("[data-day-class]");
      if (!btn) return;
      this.state = setDayClass(this.state, btn.dataset["dayClass"]!);
      this.renderAll();
    });
    el("matrix").addEventListener("click", (ev) => {
      const cell = (ev.target as HTMLElement).closest<HTMLElement>("[data-from]");
      if (!cell) return;
      const pair: Pair = [Number(cell.dataset["from"]), Number(cell.dataset["to"])];
      this.state = stagePair(this.state, pair);
      this.renderAll();
    });
    el("staged").addEventListener("click", (ev) => {
      const target = ev.target as HTMLElement;
      const unstage = target.closest<HTMLElement>("[data-unstage]");
      if (unstage) {
        this.state = unstagePair(this.state, Number(unstage.dataset["unstage"]));
        this.renderAll();
        return;
      }
      const move = target.closest<HTMLElement>("[data-move]");
      if (move) {
        const [index, delta] = move.dataset["move"]!.split(":").map(Number);
        this.state = moveStep(this.state, index!, delta === -1 ? -1 : 1);
        this.renderAll();
      }
    });
    el("clear-staged").addEventListener("click", () => {
      this.state = clearStaged(this.state);
      this.renderAll();
    });
    el("run-preview").addEventListener("click", () => void this.runPreview());
  }

  /** POST the staged pairs; latest edit wins if the user kept clicking. */
  private async runPreview(): Promise<void> {
    if (this.state.staged.length === 0 || this.previewInFlight) return;
    const posted = this.state.staged.map((p): Pair => [p[0], p[1]]);
    this.previewInFlight = true;
    this.renderAll();
    try {
      const preview = await this.api.preview(posted);
      this.state = applyPreview(this.state, posted, preview);
    } catch (err) {
      const msg = err instanceof ApiError ? err.detail : String(err);
      el("preview").innerHTML = `<p class="error">preview failed: ${msg}</p>`;
      this.previewInFlight = false;
      return;
    }
    this.previewInFlight = false;
    this.renderAll();
  }
}

if (typeof document !== "undefined" && document.getElementById("map")) {
  const base = new URLSearchParams(location.search).get("api") ?? "";
  void new App(new PlannerApi(base)).start();
}
