import type { Institution } from "./types.js";

export interface FitResult {
  toX: (dataX: number) => number;
  toY: (dataY: number) => number;
}

/** Map data coordinates into the viewport with a uniform margin. */
export function fitToViewport(
  institutions: Institution[],
  width: number,
  height: number,
  margin = 30,
): FitResult {
  const xs = institutions.map((inst) => inst.coords2d[0]);
  const ys = institutions.map((inst) => inst.coords2d[1]);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const spanX = xMax - xMin || 1;
  const spanY = yMax - yMin || 1;
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const offsetX = (width - scale * spanX) / 2;
  const offsetY = (height - scale * spanY) / 2;
  return {
    toX: (dataX) => offsetX + (dataX - xMin) * scale,
    toY: (dataY) => height - offsetY - (dataY - yMin) * scale,
  };
}

/**
 * Link opacity, strictly increasing in cosine similarity: [-1, 1] maps
 * affinely onto [0.1, 0.95].
 */
export function linkOpacity(similarity: number): number {
  const clamped = Math.min(1, Math.max(-1, similarity));
  return 0.1 + ((clamped + 1) / 2) * 0.85;
}

/** Quadratic Bezier path between two viewport points, bowed sideways. */
export function linkPath(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  bow = 0.18,
): string {
  const mx = (x1 + x2) / 2;
  const my = (y1 + y2) / 2;
  const cx = mx - (y2 - y1) * bow;
  const cy = my + (x2 - x1) * bow;
  return `M ${x1} ${y1} Q ${cx} ${cy} ${x2} ${y2}`;
}

export interface TopicWeight {
  topic: number;
  weight: number;
}

/** The three strongest topics, descending (fewer when k_topics < 3). */
export function topTopics(weights: number[], count = 3): TopicWeight[] {
  return weights
    .map((weight, topic) => ({ topic, weight }))
    .sort((a, b) => b.weight - a.weight || a.topic - b.topic)
    .slice(0, count);
}

/** Categorical palette: 12 distinguishable hues; noise (-1) renders gray. */
export const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#e15759",
  "#76b7b2",
  "#59a14f",
  "#edc948",
  "#b07aa1",
  "#ff9da7",
  "#9c755f",
  "#bab0ac",
  "#86bcb6",
  "#d37295",
];

export function clusterColor(paletteIndex: number): string {
  if (paletteIndex < 0) return "#888888";
  return PALETTE[paletteIndex % PALETTE.length];
}
