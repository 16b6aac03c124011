import { describe, expect, it } from "vitest";

import { EMPTY_FILTERS, dominantTopic, primaryTypes, visibleIds } from "../src/filter";
import { clusterColor, linkOpacity, linkPath, topTopics } from "../src/geometry";
import { ZOOM_MAX, ZOOM_MIN, initialState, pan, select, zoomAt } from "../src/state";
import { BundleFormatError, parseBundle } from "../src/validate";
import { makeBundle } from "./fixture";

describe("parseBundle", () => {
  it("accepts a well-formed 78-record bundle", () => {
    const bundle = parseBundle(JSON.parse(JSON.stringify(makeBundle())));
    expect(bundle.institutions).toHaveLength(78);
  });

  it("rejects a wrong schema version", () => {
    const raw = JSON.parse(JSON.stringify(makeBundle()));
    raw.schema_version = 99;
    expect(() => parseBundle(raw)).toThrow(BundleFormatError);
    expect(() => parseBundle(raw)).toThrow(/schema_version/);
  });

  it("rejects missing axis texts naming the axis", () => {
    const raw = JSON.parse(JSON.stringify(makeBundle()));
    delete raw.institutions[3].axis_texts.ecosystem_function;
    expect(() => parseBundle(raw)).toThrow(/ecosystem_function/);
  });

  it("rejects links to unknown ids", () => {
    const raw = JSON.parse(JSON.stringify(makeBundle()));
    raw.institutions[0].top_similar[0][0] = "missing-org";
    expect(() => parseBundle(raw)).toThrow(/unknown id/);
  });

  it("rejects non-finite coordinates", () => {
    const raw = JSON.parse(JSON.stringify(makeBundle()));
    raw.institutions[0].coords2d[0] = null;
    expect(() => parseBundle(raw)).toThrow(/coords2d/);
  });
});

describe("filters", () => {
  const bundle = makeBundle();

  it("type filter Lab matches exactly 7", () => {
    const ids = visibleIds(bundle, { ...EMPTY_FILTERS, primaryType: "Lab" });
    expect(ids.size).toBe(7);
    for (const id of ids) {
      const inst = bundle.institutions.find((i) => i.id === id)!;
      expect(inst.primary_type).toBe("Lab");
    }
  });

  it("no filters shows everything", () => {
    expect(visibleIds(bundle, EMPTY_FILTERS).size).toBe(78);
  });

  it("query searches names case-insensitively", () => {
    const ids = visibleIds(bundle, { ...EMPTY_FILTERS, query: "ORGANIZATION 7" });
    // matches Organization 7 and 70..77
    expect(ids.size).toBe(9);
  });

  it("query searches axis texts", () => {
    const ids = visibleIds(bundle, { ...EMPTY_FILTERS, query: "lab curatorial" });
    expect(ids.size).toBe(7);
  });

  it("filters are conjunctive", () => {
    const ids = visibleIds(bundle, {
      primaryType: "Lab",
      dominantTopic: null,
      query: "organization 53",
    });
    expect(ids.size).toBe(1);
  });

  it("query matching nothing yields zero", () => {
    expect(visibleIds(bundle, { ...EMPTY_FILTERS, query: "zzzznope" }).size).toBe(0);
  });

  it("dominant topic filter respects argmax of weights", () => {
    const inst = bundle.institutions[0];
    const topic = dominantTopic(inst);
    const ids = visibleIds(bundle, { ...EMPTY_FILTERS, dominantTopic: topic });
    expect(ids.has(inst.id)).toBe(true);
  });

  it("lists primary types sorted", () => {
    const types = primaryTypes(bundle);
    expect(types).toContain("Lab");
    expect([...types].sort()).toEqual(types);
  });
});

describe("view state", () => {
  const bundle = makeBundle();

  it("selecting an unknown id clears the selection", () => {
    let state = initialState();
    state = select(state, bundle, "org001");
    expect(state.selectedId).toBe("org001");
    state = select(state, bundle, "nope");
    expect(state.selectedId).toBeNull();
  });

  it("zoom clamps to bounds", () => {
    let state = initialState();
    for (let i = 0; i < 100; i += 1) state = zoomAt(state, 0, 0, 2);
    expect(state.transform.scale).toBe(ZOOM_MAX);
    for (let i = 0; i < 200; i += 1) state = zoomAt(state, 0, 0, 0.5);
    expect(state.transform.scale).toBe(ZOOM_MIN);
  });

  it("zoom keeps the pointer fixed", () => {
    const state = zoomAt(initialState(), 100, 60, 2);
    // the data point under (100, 60) stays under (100, 60)
    const before = { x: (100 - 0) / 1, y: (60 - 0) / 1 };
    const after = {
      x: (100 - state.transform.x) / state.transform.scale,
      y: (60 - state.transform.y) / state.transform.scale,
    };
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });

  it("pan accumulates offsets", () => {
    const state = pan(pan(initialState(), 10, -5), 2, 3);
    expect(state.transform.x).toBe(12);
    expect(state.transform.y).toBe(-2);
  });
});

describe("geometry", () => {
  it("link opacity is strictly monotone in similarity", () => {
    const scores = [-1, -0.4, 0, 0.3, 0.62, 0.9, 1];
    const opacities = scores.map(linkOpacity);
    for (let i = 1; i < opacities.length; i += 1) {
      expect(opacities[i]).toBeGreaterThan(opacities[i - 1]);
    }
    expect(opacities[0]).toBeGreaterThan(0);
    expect(opacities[opacities.length - 1]).toBeLessThanOrEqual(1);
  });

  it("top topics are the three largest weights, descending", () => {
    const top = topTopics([0.05, 0.3, 0.2, 0.1, 0.35]);
    expect(top.map((t) => t.topic)).toEqual([4, 1, 2]);
    expect(top[0].weight).toBeGreaterThanOrEqual(top[1].weight);
    expect(top[1].weight).toBeGreaterThanOrEqual(top[2].weight);
  });

  it("top topics handles fewer than three", () => {
    expect(topTopics([0.7, 0.3])).toHaveLength(2);
  });

  it("link path is a quadratic bezier between the endpoints", () => {
    const path = linkPath(0, 0, 10, 0);
    expect(path.startsWith("M 0 0 Q ")).toBe(true);
    expect(path.endsWith("10 0")).toBe(true);
  });

  it("noise renders gray, clusters cycle the palette", () => {
    expect(clusterColor(-1)).toBe("#888888");
    expect(clusterColor(0)).not.toBe(clusterColor(1));
    expect(clusterColor(0)).toBe(clusterColor(12));
  });
});
