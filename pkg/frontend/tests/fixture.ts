import type { Bundle, Institution } from "../src/types";

export const TYPE_COUNTS: Array<[string, number]> = [
  ["Conference", 17],
  ["Festival", 12],
  ["Center", 12],
  ["University", 8],
  ["Lab", 7],
  ["Biennial", 6],
  ["Residency", 5],
  ["Education", 3],
  ["Award", 3],
  ["Other", 5],
];

const AXIS_KEYS = [
  "curatorial_philosophy",
  "territorial_relation",
  "knowledge_production",
  "institutional_genealogy",
  "temporal_orientation",
  "ecosystem_function",
  "audience_relation",
  "disciplinary_positioning",
];

/** Deterministic small PRNG so fixtures are stable across runs. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function makeBundle(kTopics = 10, clusterCount = 10): Bundle {
  const rand = mulberry32(42);
  const institutions: Institution[] = [];
  let index = 0;
  for (const [typeName, count] of TYPE_COUNTS) {
    for (let i = 0; i < count; i += 1) {
      const cluster = index % clusterCount;
      const weights = Array.from({ length: kTopics }, () => rand() * 0.1);
      weights[cluster % kTopics] += 0.5;
      const total = weights.reduce((a, b) => a + b, 0);
      const axisTexts: Record<string, string> = {};
      for (const key of AXIS_KEYS) {
        axisTexts[key] = `${typeName.toLowerCase()} ${key.replace(/_/g, " ")} themes ${index}`;
      }
      institutions.push({
        id: `org${String(index).padStart(3, "0")}`,
        name: `Organization ${index}`,
        primary_type: typeName,
        secondary_type: i % 3 === 0 ? "Other" : null,
        country: "XX",
        founding_year: 1900 + (index % 120),
        axis_texts: axisTexts,
        coords2d: [
          Math.cos((cluster / clusterCount) * 2 * Math.PI) * 5 + rand(),
          Math.sin((cluster / clusterCount) * 2 * Math.PI) * 5 + rand(),
        ],
        cluster,
        palette_index: cluster % 12,
        topic_weights: weights.map((w) => w / total),
        top_similar: [],
        boundary: { entropy: index % 9 === 0 ? 1.0 : rand() * 0.8, flag: index % 9 === 0 },
      });
      index += 1;
    }
  }
  // top-5 similarity links with strictly decreasing scores
  const n = institutions.length;
  institutions.forEach((inst, i) => {
    const links: Array<[string, number]> = [];
    for (let j = 1; j <= 5; j += 1) {
      links.push([institutions[(i + j) % n].id, 0.95 - 0.13 * j]);
    }
    inst.top_similar = links;
  });
  return {
    schema_version: 1,
    institutions,
    topics: Array.from({ length: kTopics }, (_, t) => ({
      topic: t,
      descriptors: [
        {
          axis: t % 8,
          axis_key: AXIS_KEYS[t % 8],
          codeword: t % 7,
          weight: 1.2 - t * 0.05,
          tokens: [`token${t}a`, `token${t}b`],
        },
      ],
    })),
    cluster_count: clusterCount,
    run_metadata: {
      config_hash: "cafe0123cafe0123",
      seed: 0,
      selected_algorithm: "agglomerative_average",
      k_effective: clusterCount,
    },
  };
}

export function emptyBundle(): Bundle {
  return {
    schema_version: 1,
    institutions: [],
    topics: [],
    cluster_count: 0,
    run_metadata: {
      config_hash: "0",
      seed: 0,
      selected_algorithm: "none",
      k_effective: 0,
    },
  };
}
