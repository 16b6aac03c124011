import type { Bundle } from "./types.js";
import { EMPTY_FILTERS, Filters } from "./filter.js";

export const ZOOM_MIN = 0.5;
export const ZOOM_MAX = 40;

export interface Transform {
  scale: number;
  x: number;
  y: number;
}

export interface ViewState {
  transform: Transform;
  selectedId: string | null;
  hoveredId: string | null;
  filters: Filters;
}

export function initialState(): ViewState {
  return {
    transform: { scale: 1, x: 0, y: 0 },
    selectedId: null,
    hoveredId: null,
    filters: { ...EMPTY_FILTERS },
  };
}

/** Select an institution; unknown ids clear the selection instead. */
export function select(state: ViewState, bundle: Bundle, id: string | null): ViewState {
  const exists = id !== null && bundle.institutions.some((inst) => inst.id === id);
  return { ...state, selectedId: exists ? id : null };
}

export function hover(state: ViewState, id: string | null): ViewState {
  return { ...state, hoveredId: id };
}

export function setFilters(state: ViewState, filters: Partial<Filters>): ViewState {
  return { ...state, filters: { ...state.filters, ...filters } };
}

export function pan(state: ViewState, dx: number, dy: number): ViewState {
  const t = state.transform;
  return { ...state, transform: { ...t, x: t.x + dx, y: t.y + dy } };
}

/**
 * Zoom by `factor` keeping the viewport point (px, py) fixed
 * (wheel zoom-to-pointer). The scale is clamped to [ZOOM_MIN, ZOOM_MAX].
 */
export function zoomAt(
  state: ViewState,
  px: number,
  py: number,
  factor: number,
): ViewState {
  const t = state.transform;
  const scale = Math.min(ZOOM_MAX, Math.max(ZOOM_MIN, t.scale * factor));
  const applied = scale / t.scale;
  return {
    ...state,
    transform: {
      scale,
      x: px - (px - t.x) * applied,
      y: py - (py - t.y) * applied,
    },
  };
}
