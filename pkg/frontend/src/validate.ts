import type { Bundle, Institution } from "./types.js";

export class BundleFormatError extends Error {}

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

function fail(path: string, message: string): never {
  throw new BundleFormatError(`${path}: ${message}`);
}

function checkInstitution(raw: unknown, index: number): Institution {
  const path = `institutions[${index}]`;
  if (typeof raw !== "object" || raw === null) fail(path, "not an object");
  const inst = raw as Record<string, unknown>;
  if (typeof inst.id !== "string" || !inst.id) fail(path, "missing id");
  if (typeof inst.name !== "string") fail(path, "missing name");
  if (typeof inst.primary_type !== "string") fail(path, "missing primary_type");
  if (!Array.isArray(inst.coords2d) || inst.coords2d.length !== 2)
    fail(path, "coords2d must be a pair");
  if (!inst.coords2d.every((c) => typeof c === "number" && Number.isFinite(c)))
    fail(path, "coords2d must be finite numbers");
  if (typeof inst.cluster !== "number") fail(path, "missing cluster");
  if (!Array.isArray(inst.topic_weights)) fail(path, "missing topic_weights");
  if (!Array.isArray(inst.top_similar)) fail(path, "missing top_similar");
  for (const link of inst.top_similar) {
    if (!Array.isArray(link) || link.length !== 2 || typeof link[0] !== "string")
      fail(path, "top_similar entries must be [id, score] pairs");
  }
  const axes = inst.axis_texts;
  if (typeof axes !== "object" || axes === null) fail(path, "missing axis_texts");
  for (const key of AXIS_KEYS) {
    if (typeof (axes as Record<string, unknown>)[key] !== "string")
      fail(path, `axis_texts missing ${key}`);
  }
  const boundary = inst.boundary as Record<string, unknown> | null;
  if (
    typeof boundary !== "object" ||
    boundary === null ||
    typeof boundary.entropy !== "number" ||
    typeof boundary.flag !== "boolean"
  )
    fail(path, "missing boundary {entropy, flag}");
  return raw as Institution;
}

/** Validate a parsed JSON document; throws BundleFormatError on mismatch. */
export function parseBundle(raw: unknown): Bundle {
  if (typeof raw !== "object" || raw === null) fail("bundle", "not an object");
  const doc = raw as Record<string, unknown>;
  if (typeof doc.schema_version !== "number")
    fail("bundle", "missing schema_version");
  if (doc.schema_version !== 1)
    fail("bundle", `unsupported schema_version ${doc.schema_version}`);
  if (!Array.isArray(doc.institutions)) fail("bundle", "missing institutions");
  if (!Array.isArray(doc.topics)) fail("bundle", "missing topics");
  if (typeof doc.cluster_count !== "number") fail("bundle", "missing cluster_count");
  const institutions = doc.institutions.map(checkInstitution);
  const ids = new Set(institutions.map((inst) => inst.id));
  if (ids.size !== institutions.length) fail("bundle", "duplicate institution ids");
  institutions.forEach((inst, index) => {
    for (const [other] of inst.top_similar) {
      if (!ids.has(other))
        fail(`institutions[${index}]`, `top_similar references unknown id ${other}`);
    }
  });
  return raw as Bundle;
}
