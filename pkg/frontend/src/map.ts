/**
 * SVG stop map. Stops are colored by community, community centers get a
 * ring, and when the user has selected communities everything else is
 * dimmed. Render functions return markup strings; the shell owns the DOM.
 */

import type { Communities, Feature, GraphGeojson } from "./api";
import { communityColor } from "./colors";
import { fitProjection, type Viewport } from "./geo";

export type MapModel = {
  graph: GraphGeojson;
  communities: Communities;
  selected: number[];
  view: Viewport;
};

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

function communityOf(f: Feature): number {
  const c = f.properties["community"];
  return typeof c === "number" ? c : -1;
}

export function renderMap(model: MapModel): string {
  const byStop = new Map<string, number>();
  for (const f of model.communities.geojson.features) {
    const sid = f.properties["stop_id"];
    if (typeof sid === "string") byStop.set(sid, communityOf(f));
  }
  const centerIds = new Set(Object.values(model.communities.centers));
  const dimming = model.selected.length > 0;
  const selected = new Set(model.selected);

  const coords: [number, number][] = [];
  for (const f of model.graph.features) {
    if (f.geometry.type === "Point") {
      const [lon, lat] = f.geometry.coordinates as number[];
      coords.push([lon!, lat!]);
    }
  }
  const project = fitProjection(coords, model.view);

  const edges: string[] = [];
  const stops: string[] = [];
  const centers: string[] = [];
  for (const f of model.graph.features) {
    if (f.geometry.type === "LineString") {
      const line = f.geometry.coordinates as number[][];
      const a = line[0] ?? [0, 0];
      const b = line[line.length - 1] ?? [0, 0];
      const [x1, y1] = project(a[0]!, a[1]!);
      const [x2, y2] = project(b[0]!, b[1]!);
      edges.push(
        `<line x1="${x1.toFixed(1)}" y1="${y1.toFixed(1)}" ` +
          `x2="${x2.toFixed(1)}" y2="${y2.toFixed(1)}" ` +
          `class="edge" stroke="#cccccc" stroke-width="0.5"/>`,
      );
      continue;
    }
    const sid = f.properties["stop_id"];
    if (typeof sid !== "string") continue;
    const [lon, lat] = f.geometry.coordinates as number[];
    const [x, y] = project(lon!, lat!);
    const community = byStop.get(sid) ?? -1;
    const fill = communityColor(community);
    const dim = dimming && !selected.has(community);
    const opacity = dim ? "0.15" : "1";
    stops.push(
      `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="2.4" ` +
        `fill="${fill}" fill-opacity="${opacity}" class="stop" ` +
        `data-stop="${esc(sid)}" data-community="${community}">` +
        `<title>${esc(sid)} (community ${community})</title></circle>`,
    );
    if (centerIds.has(sid)) {
      centers.push(
        `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="5.5" ` +
          `fill="none" stroke="${fill}" stroke-width="1.8" class="center"/>`,
      );
    }
  }

  return (
    `<svg viewBox="0 0 ${model.view.width} ${model.view.height}" ` +
    `role="img" aria-label="stop map">` +
    `<g>${edges.join("")}</g><g>${stops.join("")}</g>` +
    `<g>${centers.join("")}</g></svg>`
  );
}

/** One legend chip per community, with its stop count; click to select. */
export function renderLegend(model: MapModel): string {
  const items = model.communities.stats.map((row) => {
    const id = row.community_id;
    const active = model.selected.length === 0 || model.selected.includes(id);
    return (
      `<button class="chip${active ? "" : " chip-off"}" data-community="${id}" ` +
      `title="diameter ${row.diameter} (${row.normalized_diameter.toFixed(3)} ` +
      `per stop), density ${row.density.toFixed(4)}, ` +
      `clustering ${row.avg_clustering.toFixed(3)}">` +
      `<span class="swatch" style="background:${communityColor(id)}"></span>` +
      `${id} · ${row.node_count} stops</button>`
    );
  });
  return items.join("");
}

/** Hover table for one community, built from the stats the service sent. */
export function renderCommunityDetail(model: MapModel, id: number): string {
  const row = model.communities.stats.find((r) => r.community_id === id);
  if (!row) return `<p>community ${id} not in this partition</p>`;
  const fields: [string, string][] = [
    ["stops", String(row.node_count)],
    ["diameter", String(row.diameter)],
    ["diameter / stops", row.normalized_diameter.toFixed(3)],
    ["density", row.density.toFixed(4)],
    ["avg clustering", row.avg_clustering.toFixed(3)],
    ["avg weighted degree", row.avg_weighted_degree.toFixed(2)],
    ["incl. external edges", row.avg_weighted_degree_full.toFixed(2)],
  ];
  const rows = fields
    .map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`)
    .join("");
  return `<table class="detail">${rows}</table>`;
}
