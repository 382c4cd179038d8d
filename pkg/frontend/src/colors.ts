/**
 * Categorical colors for communities. The first twelve are hand-picked
 * for contrast; beyond that we walk the hue wheel by the golden angle so
 * any k stays pairwise distinct.
 */

const BASE = [
  "#4269d0",
  "#efb118",
  "#ff725c",
  "#6cc5b0",
  "#3ca951",
  "#ff8ab7",
  "#a463f2",
  "#97bbf5",
  "#9c6b4e",
  "#bcbd22",
  "#17becf",
  "#d0021b",
];

export function communityColor(id: number): string {
  if (id < 0) return "#999999";
  if (id < BASE.length) return BASE[id]!;
  const hue = (id * 137.508) % 360;
  const light = 38 + (id % 3) * 9;
  return `hsl(${hue.toFixed(1)}, 62%, ${light}%)`;
}

export function palette(k: number): string[] {
  return Array.from({ length: k }, (_, i) => communityColor(i));
}

/** Heat-matrix cell fill: white at zero to a deep blue at the maximum. */
export function heat(value: number, max: number): string {
  if (max <= 0 || value <= 0) return "#ffffff";
  const t = Math.sqrt(value / max); // sqrt lifts the small counts into view
  const light = 97 - t * 55;
  return `hsl(215, 70%, ${light.toFixed(1)}%)`;
}
