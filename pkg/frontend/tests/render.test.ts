import { beforeEach, describe, expect, it } from "vitest";

import { createExplorer, renderError } from "../src/render";
import { emptyBundle, makeBundle } from "./fixture";

function mount() {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app") as HTMLElement;
}

function marks(root: HTMLElement): SVGCircleElement[] {
  return [...root.querySelectorAll("circle[data-id]")] as SVGCircleElement[];
}

describe("map rendering", () => {
  let root: HTMLElement;

  beforeEach(() => {
    root = mount();
  });

  it("renders one mark per institution with cluster colors", () => {
    createExplorer(root, makeBundle());
    const circles = marks(root);
    expect(circles).toHaveLength(78);
    const colors = new Set(circles.map((c) => c.getAttribute("fill")));
    expect(colors.size).toBe(10);
  });

  it("empty bundle shows an empty state, not a blank screen", () => {
    createExplorer(root, emptyBundle());
    expect(root.querySelector('[data-role="empty-state"]')).not.toBeNull();
    expect(root.textContent).toMatch(/no institutions/i);
  });

  it("clicking a mark opens the detail panel for that institution", () => {
    const bundle = makeBundle();
    createExplorer(root, bundle);
    const circle = marks(root)[4];
    circle.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    const panel = root.querySelector('[data-role="panel"]')!;
    expect(panel.textContent).toContain("Organization 4");
    expect(panel.querySelectorAll('[data-role="axis-texts"] dt')).toHaveLength(8);
  });

  it("marks are keyboard-activatable", () => {
    createExplorer(root, makeBundle());
    const circle = marks(root)[2];
    expect(circle.getAttribute("tabindex")).toBe("0");
    circle.dispatchEvent(
      new KeyboardEvent("keydown", { key: "Enter", bubbles: true }),
    );
    expect(root.querySelector('[data-role="panel"]')!.textContent).toContain(
      "Organization 2",
    );
  });

  it("error state is visible", () => {
    renderError(root, "schema_version: unsupported");
    const box = root.querySelector('[data-role="error-state"]')!;
    expect(box.textContent).toContain("schema_version");
  });
});

describe("similarity links", () => {
  it("selection draws five links with opacity monotone in similarity", () => {
    const root = mount();
    const bundle = makeBundle();
    const controller = createExplorer(root, bundle);
    controller.selectById("org000");
    const links = [...root.querySelectorAll('path[data-role="link"]')];
    expect(links).toHaveLength(5);
    const byTarget = new Map(
      links.map((p) => [p.getAttribute("data-target"), Number(p.getAttribute("stroke-opacity"))]),
    );
    const scores = bundle.institutions[0].top_similar;
    for (let i = 1; i < scores.length; i += 1) {
      const [prevId, prevScore] = scores[i - 1];
      const [currId, currScore] = scores[i];
      expect(prevScore).toBeGreaterThan(currScore);
      expect(byTarget.get(prevId)!).toBeGreaterThan(byTarget.get(currId)!);
    }
  });

  it("deselection clears all links", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    controller.selectById("org000");
    expect(root.querySelectorAll('path[data-role="link"]')).toHaveLength(5);
    controller.selectById(null);
    expect(root.querySelectorAll('path[data-role="link"]')).toHaveLength(0);
  });

  it("fewer than five neighbors draws what exists", () => {
    const root = mount();
    const bundle = makeBundle();
    bundle.institutions[0].top_similar = bundle.institutions[0].top_similar.slice(0, 2);
    const controller = createExplorer(root, bundle);
    controller.selectById("org000");
    expect(root.querySelectorAll('path[data-role="link"]')).toHaveLength(2);
  });
});

describe("filtering in the view", () => {
  it("type filter Lab highlights exactly 7 and dims the rest", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    controller.updateFilters({ primaryType: "Lab" });
    const circles = marks(root);
    const bright = circles.filter((c) => c.getAttribute("opacity") === "1");
    const dimmed = circles.filter((c) => c.getAttribute("opacity") !== "1");
    expect(bright).toHaveLength(7);
    expect(dimmed).toHaveLength(71);
    expect(circles).toHaveLength(78); // dimmed, not removed
    expect(root.querySelector('[data-role="count"]')!.textContent).toBe(
      "7 of 78 shown",
    );
  });

  it("query matching nothing shows count 0", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    controller.updateFilters({ query: "zzzznope" });
    expect(root.querySelector('[data-role="count"]')!.textContent).toBe(
      "0 of 78 shown",
    );
  });

  it("clearing filters restores all marks", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    controller.updateFilters({ primaryType: "Lab", query: "organization" });
    (root.querySelector('[data-role="clear-filters"]') as HTMLButtonElement).click();
    const bright = marks(root).filter((c) => c.getAttribute("opacity") === "1");
    expect(bright).toHaveLength(78);
  });

  it("filter controls are labelled for assistive tech", () => {
    const root = mount();
    createExplorer(root, makeBundle());
    expect(
      root.querySelector('[data-role="type-filter"]')!.getAttribute("aria-label"),
    ).toBeTruthy();
    expect(
      root.querySelector('[data-role="search"]')!.getAttribute("aria-label"),
    ).toBeTruthy();
  });
});

describe("detail panel", () => {
  it("shows metadata, top-3 topic bars descending, and axis texts", () => {
    const root = mount();
    const bundle = makeBundle();
    const controller = createExplorer(root, bundle);
    controller.selectById("org010");
    const panel = root.querySelector('[data-role="panel"]')!;
    expect(panel.textContent).toContain("Organization 10");
    expect(panel.textContent).toContain("1910");
    const bars = [...panel.querySelectorAll('[data-role="topic-bars"] li')];
    expect(bars).toHaveLength(3);
    const weights = bars.map((b) => {
      const match = /([\d.]+)%/.exec(b.textContent ?? "");
      return Number(match![1]);
    });
    expect(weights[0]).toBeGreaterThanOrEqual(weights[1]);
    expect(weights[1]).toBeGreaterThanOrEqual(weights[2]);
  });

  it("boundary badge appears only for flagged institutions", () => {
    const root = mount();
    const bundle = makeBundle();
    const controller = createExplorer(root, bundle);
    const flagged = bundle.institutions.find((inst) => inst.boundary.flag)!;
    const plain = bundle.institutions.find((inst) => !inst.boundary.flag)!;
    controller.selectById(flagged.id);
    expect(root.querySelector('[data-role="boundary-badge"]')).not.toBeNull();
    controller.selectById(plain.id);
    expect(root.querySelector('[data-role="boundary-badge"]')).toBeNull();
  });

  it("clicking a similar row navigates the selection and re-renders links", () => {
    const root = mount();
    const bundle = makeBundle();
    const controller = createExplorer(root, bundle);
    controller.selectById("org000");
    const firstRow = root.querySelector(
      '[data-role="similar-row"]',
    ) as HTMLButtonElement;
    const targetId = firstRow.dataset.id!;
    firstRow.click();
    expect(controller.state.selectedId).toBe(targetId);
    const links = [...root.querySelectorAll('path[data-role="link"]')];
    const expected = bundle.institutions.find((inst) => inst.id === targetId)!;
    expect(links.map((l) => l.getAttribute("data-target"))).toEqual(
      expected.top_similar.map(([other]) => other),
    );
  });

  it("escape clears the selection", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    controller.selectById("org000");
    const svg = root.querySelector('svg[data-role="map"]')!;
    svg.dispatchEvent(new KeyboardEvent("keydown", { key: "Escape", bubbles: true }));
    expect(controller.state.selectedId).toBeNull();
    expect(root.querySelector('[data-role="panel-hint"]')).not.toBeNull();
  });
});

describe("pan and zoom", () => {
  it("wheel zooms toward the pointer and rescales marks", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    const svg = root.querySelector('svg[data-role="map"]') as SVGSVGElement;
    const before = controller.state.transform.scale;
    svg.dispatchEvent(
      new WheelEvent("wheel", { deltaY: -240, clientX: 10, clientY: 10, bubbles: true }),
    );
    expect(controller.state.transform.scale).toBeGreaterThan(before);
    const viewport = root.querySelector('g[data-role="viewport"]')!;
    expect(viewport.getAttribute("transform")).toContain("scale(");
  });

  it("arrow keys pan the viewport", () => {
    const root = mount();
    const controller = createExplorer(root, makeBundle());
    const svg = root.querySelector('svg[data-role="map"]')!;
    svg.dispatchEvent(
      new KeyboardEvent("keydown", { key: "ArrowRight", bubbles: true }),
    );
    expect(controller.state.transform.x).not.toBe(0);
  });

  it("the bundle object is never mutated by interactions", () => {
    const root = mount();
    const bundle = makeBundle();
    const snapshot = JSON.stringify(bundle);
    const controller = createExplorer(root, bundle);
    controller.selectById("org003");
    controller.updateFilters({ primaryType: "Lab", query: "org" });
    const svg = root.querySelector('svg[data-role="map"]')!;
    svg.dispatchEvent(new WheelEvent("wheel", { deltaY: -100, bubbles: true }));
    expect(JSON.stringify(bundle)).toBe(snapshot);
  });
});
