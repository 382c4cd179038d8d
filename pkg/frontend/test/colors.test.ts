import { describe, expect, it } from "vitest";

import { communityColor, heat, palette } from "../src/colors";

describe("palette", () => {
  it("stays pairwise distinct out to fifty communities", () => {
    const colors = palette(50);
    expect(new Set(colors).size).toBe(50);
  });

  it("is stable: the same id always gets the same color", () => {
    expect(communityColor(7)).toBe(communityColor(7));
    expect(communityColor(31)).toBe(communityColor(31));
  });

  it("maps unassigned (negative) ids to grey", () => {
    expect(communityColor(-1)).toBe("#999999");
  });
});

describe("heat", () => {
  it("is white at zero and darkest at the maximum", () => {
    expect(heat(0, 10)).toBe("#ffffff");
    const top = heat(10, 10);
    const mid = heat(5, 10);
    const lightness = (c: string) => Number(/ (\d+\.?\d*)%\)$/.exec(c)?.[1]);
    expect(lightness(top)).toBeLessThan(lightness(mid));
  });

  it("tolerates an all-zero matrix", () => {
    expect(heat(0, 0)).toBe("#ffffff");
    expect(heat(3, 0)).toBe("#ffffff");
  });
});
