/**
 * Staged express links and the previewed effect on network reach. The
 * preview is a sequence of graph snapshots (baseline, then one per staged
 * link); each of the three distance metrics gets a small line chart plus a
 * per-step delta table.
 */

import type { Preview, TrajectoryPoint } from "./api";
import type { Pair, ViewState } from "./state";

const SERIES: { key: "apl" | "avg_ecc" | "diameter"; label: string }[] = [
  { key: "apl", label: "average path length" },
  { key: "avg_ecc", label: "average eccentricity" },
  { key: "diameter", label: "diameter" },
];

export function renderStagedList(state: ViewState): string {
  if (state.staged.length === 0) {
    return `<p class="empty">click a flow cell to stage an express link</p>`;
  }
  const items = state.staged.map((pair: Pair, i: number) => {
    const up = i > 0 ? `<button data-move="${i}:-1">↑</button>` : "";
    const down =
      i < state.staged.length - 1 ? `<button data-move="${i}:1">↓</button>` : "";
    return (
      `<li>link ${i + 1}: community ${pair[0]} ↔ ${pair[1]} ` +
      `${up}${down}<button data-unstage="${i}">remove</button></li>`
    );
  });
  return `<ol class="staged">${items.join("")}</ol>`;
}

function sparkline(
  points: TrajectoryPoint[],
  key: "apl" | "avg_ecc" | "diameter",
): string {
  const w = 220;
  const h = 60;
  const pad = 6;
  const values = points.map((p) => p[key]);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const step = points.length > 1 ? (w - 2 * pad) / (points.length - 1) : 0;
  const xy = values.map((v, i) => {
    const x = pad + i * step;
    const y = pad + (h - 2 * pad) * (1 - (v - lo) / span);
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });
  const dots = xy
    .map((p) => {
      const [x, y] = p.split(",");
      return `<circle cx="${x}" cy="${y}" r="2.5" fill="#1f77b4"/>`;
    })
    .join("");
  return (
    `<svg viewBox="0 0 ${w} ${h}" class="spark" data-metric="${key}">` +
    `<polyline points="${xy.join(" ")}" fill="none" stroke="#1f77b4" ` +
    `stroke-width="1.5"/>${dots}</svg>`
  );
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(3);
}

function deltaCell(v: number): string {
  if (v === 0) return `<td class="delta">0</td>`;
  const cls = v < 0 ? "delta delta-down" : "delta delta-up";
  return `<td class="${cls}">${v > 0 ? "+" : ""}${fmt(v)}</td>`;
}

export function renderTrajectory(preview: Preview, stale: boolean): string {
  const points = preview.trajectory;
  const charts = SERIES.map(
    (s) =>
      `<figure><figcaption>${s.label}</figcaption>${sparkline(points, s.key)}` +
      `<span class="endpoints">${fmt(points[0]![s.key])} → ` +
      `${fmt(points[points.length - 1]![s.key])}</span></figure>`,
  ).join("");

  const rows = points
    .map((p, i) => {
      const label =
        i === 0
          ? "baseline"
          : `+ link ${p.step}` +
            (preview.steps[i - 1]
              ? ` (${preview.steps[i - 1]!.communities.join("↔")})`
              : "");
      return (
        `<tr><td>${label}</td>` +
        `<td>${fmt(p.apl)}</td>${deltaCell(p.delta_apl)}` +
        `<td>${fmt(p.avg_ecc)}</td>${deltaCell(p.delta_ecc)}` +
        `<td>${p.diameter}</td>${deltaCell(p.delta_diam)}</tr>`
      );
    })
    .join("");

  const staleNote = stale
    ? `<p class="stale">staged links changed since this preview; run it again</p>`
    : "";

  return (
    staleNote +
    `<div class="charts">${charts}</div>` +
    `<table class="trajectory"><thead><tr><th>state</th>` +
    `<th>path len</th><th>Δ</th><th>eccentricity</th><th>Δ</th>` +
    `<th>diameter</th><th>Δ</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}
