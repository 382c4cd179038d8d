/**
 * Community-to-community flow matrix rendered as a heat table. Off-diagonal
 * cells carry data attributes so the shell can wire click-to-stage; the
 * diagonal (flow inside one community) is not a candidate for a new link.
 */

import type { FlowEntry, Flows } from "./api";
import { communityColor, heat } from "./colors";

export type FlowView = {
  flows: Flows;
  dayClass: string;
  staged: [number, number][];
};

function maxOffDiagonal(matrix: number[][]): number {
  let best = 0;
  for (let i = 0; i < matrix.length; i++) {
    for (let j = 0; j < matrix.length; j++) {
      const v = matrix[i]?.[j] ?? 0;
      if (i !== j && v > best) best = v;
    }
  }
  return best;
}

function isStaged(staged: [number, number][], a: number, b: number): boolean {
  return staged.some(([x, y]) => (x === a && y === b) || (x === b && y === a));
}

export function renderDayClassPicker(flows: Flows, active: string): string {
  const known = ["weekday", "saturday", "sunday_holiday"];
  const buttons = known.map((dc) => {
    const entry = flows.day_classes[dc];
    if (!entry) {
      return `<button class="day" disabled title="no validations in this day class">${dc}</button>`;
    }
    const cls = dc === active ? "day day-active" : "day";
    return `<button class="${cls}" data-day-class="${dc}">${dc} · ${entry.days ?? "?"}d</button>`;
  });
  return buttons.join("");
}

export function renderFlowMatrix(view: FlowView): string {
  const entry: FlowEntry | undefined = view.flows.day_classes[view.dayClass];
  if (!entry) {
    return `<p class="empty">no flow matrix for ${view.dayClass}</p>`;
  }
  const k = entry.community_count;
  const scale = maxOffDiagonal(entry.matrix);

  const head = [`<th></th>`];
  for (let j = 0; j < k; j++) {
    head.push(
      `<th><span class="swatch" style="background:${communityColor(j)}"></span>${j}</th>`,
    );
  }

  const rows: string[] = [];
  for (let i = 0; i < k; i++) {
    const cells = [
      `<th><span class="swatch" style="background:${communityColor(i)}"></span>${i}</th>`,
    ];
    for (let j = 0; j < k; j++) {
      const v = entry.matrix[i]?.[j] ?? 0;
      if (i === j) {
        cells.push(`<td class="diag" title="within community ${i}">${v}</td>`);
        continue;
      }
      const staged = isStaged(view.staged, i, j);
      const cls = staged ? "cell staged" : "cell";
      cells.push(
        `<td class="${cls}" style="background:${heat(v, scale)}" ` +
          `data-from="${i}" data-to="${j}" ` +
          `title="${v} trips from ${i} to ${j}">${v}</td>`,
      );
    }
    rows.push(`<tr>${cells.join("")}</tr>`);
  }

  return (
    `<table class="flows"><thead><tr>${head.join("")}</tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
}

/** Intra/inter split and the largest cross-community pairs, as a banner. */
export function renderFlowSummary(entry: FlowEntry): string {
  const parts: string[] = [];
  if (entry.pct_intra !== undefined && entry.pct_inter !== undefined) {
    parts.push(
      `<strong>${entry.pct_intra.toFixed(1)}%</strong> of assigned trips stay ` +
        `inside a community, <strong>${entry.pct_inter.toFixed(1)}%</strong> cross`,
    );
  }
  if (entry.unassigned > 0) {
    parts.push(`${entry.unassigned} trips touch stops outside the giant component`);
  }
  const top = (entry.top_inter_pairs ?? [])
    .slice(0, 3)
    .map((p) => `${p.communities[0]}↔${p.communities[1]} (${p.flow})`);
  if (top.length > 0) {
    parts.push(`busiest links: ${top.join(", ")}`);
  }
  return `<p class="flow-summary">${parts.join(" · ")}</p>`;
}
