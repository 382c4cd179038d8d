/**
 * Tiny equirectangular projection for the stop map. The networks we draw
 * span a few kilometres, so a flat lon/lat fit with a cosine correction
 * is indistinguishable from a real projection at screen resolution.
 */

export type Viewport = {
  width: number;
  height: number;
  pad: number;
};

export type Projection = (lon: number, lat: number) => [number, number];

export function fitProjection(
  coords: [number, number][],
  view: Viewport,
): Projection {
  if (coords.length === 0) {
    return () => [view.width / 2, view.height / 2];
  }
  let lonMin = Infinity;
  let lonMax = -Infinity;
  let latMin = Infinity;
  let latMax = -Infinity;
  for (const [lon, lat] of coords) {
    lonMin = Math.min(lonMin, lon);
    lonMax = Math.max(lonMax, lon);
    latMin = Math.min(latMin, lat);
    latMax = Math.max(latMax, lat);
  }
  const latMid = (latMin + latMax) / 2;
  const kx = Math.cos((latMid * Math.PI) / 180);
  const spanX = Math.max((lonMax - lonMin) * kx, 1e-9);
  const spanY = Math.max(latMax - latMin, 1e-9);
  const innerW = view.width - 2 * view.pad;
  const innerH = view.height - 2 * view.pad;
  const scale = Math.min(innerW / spanX, innerH / spanY);
  const lonMid = (lonMin + lonMax) / 2;
  return (lon, lat) => [
    view.width / 2 + (lon - lonMid) * kx * scale,
    // screen y grows downward, latitude grows upward
    view.height / 2 + (latMid - lat) * scale,
  ];
}
