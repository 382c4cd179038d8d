/**
 * Session state for the planner: which day class is shown, which
 * communities are highlighted, the staged intervention pairs, and the
 * last preview. All transitions are pure functions so the rules (staged
 * pairs stay distinct, any edit stales the preview) are testable without
 * a browser.
 */

import type { Preview } from "./api";

export type Pair = [number, number];

export type ViewState = {
  dayClass: string;
  selectedCommunities: number[];
  staged: Pair[];
  preview: Preview | null;
  /** True when `preview` was computed for exactly the current `staged`. */
  previewFresh: boolean;
};

export function initialState(dayClass = "weekday"): ViewState {
  return {
    dayClass,
    selectedCommunities: [],
    staged: [],
    preview: null,
    previewFresh: false,
  };
}

function sameUnordered(a: Pair, b: Pair): boolean {
  return (a[0] === b[0] && a[1] === b[1]) || (a[0] === b[1] && a[1] === b[0]);
}

export function isStaged(state: ViewState, pair: Pair): boolean {
  return state.staged.some((p) => sameUnordered(p, pair));
}

/** Staging an already-staged pair is a no-op; self-pairs are rejected. */
export function stagePair(state: ViewState, pair: Pair): ViewState {
  if (pair[0] === pair[1] || isStaged(state, pair)) return state;
  return {
    ...state,
    staged: [...state.staged, pair],
    previewFresh: false,
  };
}

export function unstagePair(state: ViewState, index: number): ViewState {
  if (index < 0 || index >= state.staged.length) return state;
  return {
    ...state,
    staged: state.staged.filter((_, i) => i !== index),
    previewFresh: false,
  };
}

export function moveStep(state: ViewState, index: number, delta: -1 | 1): ViewState {
  const target = index + delta;
  if (index < 0 || index >= state.staged.length) return state;
  if (target < 0 || target >= state.staged.length) return state;
  const staged = [...state.staged];
  const a = staged[index]!;
  staged[index] = staged[target]!;
  staged[target] = a;
  return { ...state, staged, previewFresh: false };
}

export function clearStaged(state: ViewState): ViewState {
  return { ...state, staged: [], preview: null, previewFresh: false };
}

/**
 * Record a preview result. It only counts as fresh if the staged pairs
 * still match what was posted (the user may have edited meanwhile:
 * latest-wins).
 */
export function applyPreview(
  state: ViewState,
  posted: Pair[],
  preview: Preview,
): ViewState {
  const fresh =
    posted.length === state.staged.length &&
    posted.every((p, i) => {
      const s = state.staged[i];
      return s !== undefined && s[0] === p[0] && s[1] === p[1];
    });
  return { ...state, preview, previewFresh: fresh };
}

export function setDayClass(state: ViewState, dayClass: string): ViewState {
  return { ...state, dayClass };
}

export function toggleCommunity(state: ViewState, id: number): ViewState {
  const selected = state.selectedCommunities.includes(id)
    ? state.selectedCommunities.filter((c) => c !== id)
    : [...state.selectedCommunities, id];
  return { ...state, selectedCommunities: selected };
}
