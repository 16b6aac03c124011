import type { Bundle, Institution } from "./types.js";

export interface Filters {
  primaryType: string | null;
  dominantTopic: number | null;
  query: string;
}

export const EMPTY_FILTERS: Filters = {
  primaryType: null,
  dominantTopic: null,
  query: "",
};

/** Index of the institution's strongest topic (-1 when it has none). */
export function dominantTopic(inst: Institution): number {
  let best = -1;
  let bestWeight = -Infinity;
  inst.topic_weights.forEach((w, i) => {
    if (w > bestWeight) {
      bestWeight = w;
      best = i;
    }
  });
  return best;
}

function matchesQuery(inst: Institution, needle: string): boolean {
  if (!needle) return true;
  const haystacks = [inst.name, ...Object.values(inst.axis_texts)];
  return haystacks.some((text) => text.toLowerCase().includes(needle));
}

/**
 * Ids passing the conjunction of the active filters. Non-matching marks are
 * dimmed by the view, never removed, so the full map stays in context.
 */
export function visibleIds(bundle: Bundle, filters: Filters): Set<string> {
  const needle = filters.query.trim().toLowerCase();
  const out = new Set<string>();
  for (const inst of bundle.institutions) {
    if (filters.primaryType !== null && inst.primary_type !== filters.primaryType)
      continue;
    if (
      filters.dominantTopic !== null &&
      dominantTopic(inst) !== filters.dominantTopic
    )
      continue;
    if (!matchesQuery(inst, needle)) continue;
    out.add(inst.id);
  }
  return out;
}

export function primaryTypes(bundle: Bundle): string[] {
  return [...new Set(bundle.institutions.map((inst) => inst.primary_type))].sort();
}
