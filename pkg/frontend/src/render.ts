import type { Bundle } from "./types.js";
import { Filters, primaryTypes, visibleIds } from "./filter.js";
import {
  clusterColor,
  fitToViewport,
  linkOpacity,
  linkPath,
  topTopics,
} from "./geometry.js";
import {
  ViewState,
  initialState,
  pan,
  select,
  setFilters,
  zoomAt,
} from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const DIMMED_OPACITY = "0.15";
const MARK_RADIUS = 6;

export interface ExplorerController {
  readonly state: ViewState;
  selectById(id: string | null): void;
  updateFilters(filters: Partial<Filters>): void;
  dispose(): void;
}

/** Render an interactive explorer for a validated bundle into `root`. */
export function createExplorer(root: HTMLElement, bundle: Bundle): ExplorerController {
  root.innerHTML = "";
  root.classList.add("explorer");

  if (bundle.institutions.length === 0) {
    const empty = document.createElement("p");
    empty.dataset.role = "empty-state";
    empty.textContent = "This bundle contains no institutions.";
    root.appendChild(empty);
    return {
      get state() {
        return initialState();
      },
      selectById: () => undefined,
      updateFilters: () => undefined,
      dispose: () => undefined,
    };
  }

  let state = initialState();
  const byId = new Map(bundle.institutions.map((inst) => [inst.id, inst]));
  const width = 900;
  const height = 620;
  const fit = fitToViewport(bundle.institutions, width, height);

  // --- static scaffolding ---------------------------------------------
  const toolbar = document.createElement("div");
  toolbar.className = "toolbar";

  const typeSelect = document.createElement("select");
  typeSelect.dataset.role = "type-filter";
  typeSelect.setAttribute("aria-label", "Filter by institution type");
  typeSelect.appendChild(new Option("All types", ""));
  for (const name of primaryTypes(bundle)) typeSelect.appendChild(new Option(name, name));

  const topicSelect = document.createElement("select");
  topicSelect.dataset.role = "topic-filter";
  topicSelect.setAttribute("aria-label", "Filter by dominant topic");
  topicSelect.appendChild(new Option("All topics", ""));
  for (const topic of bundle.topics)
    topicSelect.appendChild(new Option(`Topic ${topic.topic}`, String(topic.topic)));

  const search = document.createElement("input");
  search.type = "search";
  search.placeholder = "Search names and axis texts";
  search.dataset.role = "search";
  search.setAttribute("aria-label", "Full-text search");

  const clearButton = document.createElement("button");
  clearButton.dataset.role = "clear-filters";
  clearButton.textContent = "Clear";

  const count = document.createElement("span");
  count.dataset.role = "count";
  count.setAttribute("aria-live", "polite");

  toolbar.append(typeSelect, topicSelect, search, clearButton, count);

  const main = document.createElement("div");
  main.className = "main";

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.dataset.role = "map";
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("tabindex", "0");
  svg.setAttribute("role", "application");
  svg.setAttribute(
    "aria-label",
    "Institution map; use arrow keys to pan, plus and minus to zoom, Escape to clear the selection",
  );

  const viewport = document.createElementNS(SVG_NS, "g");
  viewport.dataset.role = "viewport";
  const linkLayer = document.createElementNS(SVG_NS, "g");
  linkLayer.dataset.role = "links";
  const markLayer = document.createElementNS(SVG_NS, "g");
  markLayer.dataset.role = "marks";
  viewport.append(linkLayer, markLayer);
  svg.appendChild(viewport);

  const panel = document.createElement("aside");
  panel.dataset.role = "panel";
  panel.setAttribute("aria-live", "polite");

  main.append(svg, panel);
  root.append(toolbar, main);

  const marks = new Map<string, SVGCircleElement>();
  for (const inst of bundle.institutions) {
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.dataset.id = inst.id;
    circle.setAttribute("cx", String(fit.toX(inst.coords2d[0])));
    circle.setAttribute("cy", String(fit.toY(inst.coords2d[1])));
    circle.setAttribute("r", String(MARK_RADIUS));
    circle.setAttribute("fill", clusterColor(inst.palette_index));
    circle.setAttribute("tabindex", "0");
    circle.setAttribute("role", "button");
    circle.setAttribute("aria-label", `${inst.name} (${inst.primary_type})`);
    markLayer.appendChild(circle);
    marks.set(inst.id, circle);
  }

  // --- view updates ----------------------------------------------------
  function renderTransform(): void {
    const t = state.transform;
    viewport.setAttribute("transform", `translate(${t.x} ${t.y}) scale(${t.scale})`);
    const radius = MARK_RADIUS / Math.sqrt(t.scale);
    for (const circle of marks.values()) circle.setAttribute("r", String(radius));
  }

  function renderFilters(): void {
    const visible = visibleIds(bundle, state.filters);
    for (const inst of bundle.institutions) {
      const circle = marks.get(inst.id)!;
      const dimmed = !visible.has(inst.id);
      circle.setAttribute("opacity", dimmed ? DIMMED_OPACITY : "1");
      circle.classList.toggle("dimmed", dimmed);
    }
    count.textContent = `${visible.size} of ${bundle.institutions.length} shown`;
  }

  function renderLinks(): void {
    linkLayer.innerHTML = "";
    const inst = state.selectedId ? byId.get(state.selectedId) : undefined;
    if (!inst) return;
    const x1 = fit.toX(inst.coords2d[0]);
    const y1 = fit.toY(inst.coords2d[1]);
    for (const [otherId, score] of inst.top_similar) {
      const other = byId.get(otherId);
      if (!other) continue;
      const path = document.createElementNS(SVG_NS, "path");
      path.dataset.role = "link";
      path.dataset.target = otherId;
      path.setAttribute(
        "d",
        linkPath(x1, y1, fit.toX(other.coords2d[0]), fit.toY(other.coords2d[1])),
      );
      path.setAttribute("fill", "none");
      path.setAttribute("stroke", "#1f2a44");
      path.setAttribute("stroke-width", "2");
      path.setAttribute("stroke-opacity", String(linkOpacity(score)));
      linkLayer.appendChild(path);
    }
  }

  function renderSelection(): void {
    for (const [id, circle] of marks) {
      circle.classList.toggle("selected", id === state.selectedId);
      circle.setAttribute(
        "stroke",
        id === state.selectedId ? "#111111" : "none",
      );
    }
    renderLinks();
    renderPanel();
  }

  function renderPanel(): void {
    panel.innerHTML = "";
    const inst = state.selectedId ? byId.get(state.selectedId) : undefined;
    if (!inst) {
      const hint = document.createElement("p");
      hint.dataset.role = "panel-hint";
      hint.textContent = "Select an institution to see its profile.";
      panel.appendChild(hint);
      return;
    }
    const title = document.createElement("h2");
    title.textContent = inst.name;
    panel.appendChild(title);

    const meta = document.createElement("p");
    meta.dataset.role = "meta";
    const types = inst.secondary_type
      ? `${inst.primary_type} / ${inst.secondary_type}`
      : inst.primary_type;
    meta.textContent = `${types} - ${inst.country} - ${inst.founding_year}`;
    panel.appendChild(meta);

    if (inst.boundary.flag) {
      const badge = document.createElement("span");
      badge.dataset.role = "boundary-badge";
      badge.textContent = `boundary institution (H = ${inst.boundary.entropy.toFixed(2)})`;
      panel.appendChild(badge);
    }

    const topicsHeading = document.createElement("h3");
    topicsHeading.textContent = "Thematic profile";
    panel.appendChild(topicsHeading);
    const topicList = document.createElement("ol");
    topicList.dataset.role = "topic-bars";
    for (const { topic, weight } of topTopics(inst.topic_weights)) {
      const item = document.createElement("li");
      item.dataset.topic = String(topic);
      const bar = document.createElement("span");
      bar.className = "bar";
      bar.style.width = `${Math.round(weight * 100)}%`;
      const label = document.createElement("span");
      label.textContent = `Topic ${topic}: ${(weight * 100).toFixed(1)}%`;
      item.append(bar, label);
      topicList.appendChild(item);
    }
    panel.appendChild(topicList);

    const axesHeading = document.createElement("h3");
    axesHeading.textContent = "Conceptual axes";
    panel.appendChild(axesHeading);
    const axes = document.createElement("dl");
    axes.dataset.role = "axis-texts";
    for (const [key, text] of Object.entries(inst.axis_texts)) {
      const term = document.createElement("dt");
      term.textContent = key.replace(/_/g, " ");
      const detail = document.createElement("dd");
      detail.textContent = text;
      axes.append(term, detail);
    }
    panel.appendChild(axes);

    const similarHeading = document.createElement("h3");
    similarHeading.textContent = "Most similar";
    panel.appendChild(similarHeading);
    const list = document.createElement("ul");
    list.dataset.role = "similar-list";
    for (const [otherId, score] of inst.top_similar) {
      const other = byId.get(otherId);
      if (!other) continue;
      const item = document.createElement("li");
      const button = document.createElement("button");
      button.dataset.role = "similar-row";
      button.dataset.id = otherId;
      const bar = document.createElement("span");
      bar.className = "score-bar";
      bar.style.width = `${Math.round(Math.max(0, score) * 100)}%`;
      const label = document.createElement("span");
      label.textContent = `${other.name} (${score.toFixed(3)})`;
      button.append(bar, label);
      button.addEventListener("click", () => controller.selectById(otherId));
      item.appendChild(button);
      list.appendChild(item);
    }
    panel.appendChild(list);
  }

  function renderAll(): void {
    renderTransform();
    renderFilters();
    renderSelection();
  }

  // --- events ----------------------------------------------------------
  function onMarkActivate(event: Event): void {
    const target = event.target as Element | null;
    const id = target instanceof Element ? target.getAttribute("data-id") : null;
    if (id) controller.selectById(id);
  }

  markLayer.addEventListener("click", onMarkActivate);
  markLayer.addEventListener("keydown", (event) => {
    const key = (event as KeyboardEvent).key;
    if (key === "Enter" || key === " ") {
      event.preventDefault();
      onMarkActivate(event);
    }
  });

  svg.addEventListener("wheel", (event) => {
    event.preventDefault();
    const wheel = event as WheelEvent;
    const rect = svg.getBoundingClientRect();
    const factor = Math.exp(-wheel.deltaY * 0.0015);
    state = zoomAt(state, wheel.clientX - rect.left, wheel.clientY - rect.top, factor);
    renderTransform();
  });

  let dragging: { x: number; y: number } | null = null;
  svg.addEventListener("mousedown", (event) => {
    dragging = { x: (event as MouseEvent).clientX, y: (event as MouseEvent).clientY };
  });
  const onMouseMove = (event: MouseEvent) => {
    if (!dragging) return;
    state = pan(state, event.clientX - dragging.x, event.clientY - dragging.y);
    dragging = { x: event.clientX, y: event.clientY };
    renderTransform();
  };
  const onMouseUp = () => {
    dragging = null;
  };
  document.addEventListener("mousemove", onMouseMove);
  document.addEventListener("mouseup", onMouseUp);

  svg.addEventListener("keydown", (event) => {
    const key = (event as KeyboardEvent).key;
    const step = 40;
    if (key === "ArrowLeft") state = pan(state, step, 0);
    else if (key === "ArrowRight") state = pan(state, -step, 0);
    else if (key === "ArrowUp") state = pan(state, 0, step);
    else if (key === "ArrowDown") state = pan(state, 0, -step);
    else if (key === "+" || key === "=") state = zoomAt(state, width / 2, height / 2, 1.25);
    else if (key === "-") state = zoomAt(state, width / 2, height / 2, 0.8);
    else if (key === "Escape") {
      controller.selectById(null);
      return;
    } else return;
    event.preventDefault();
    renderTransform();
  });

  typeSelect.addEventListener("change", () =>
    controller.updateFilters({ primaryType: typeSelect.value || null }),
  );
  topicSelect.addEventListener("change", () =>
    controller.updateFilters({
      dominantTopic: topicSelect.value === "" ? null : Number(topicSelect.value),
    }),
  );
  search.addEventListener("input", () => controller.updateFilters({ query: search.value }));
  clearButton.addEventListener("click", () => {
    typeSelect.value = "";
    topicSelect.value = "";
    search.value = "";
    controller.updateFilters({ primaryType: null, dominantTopic: null, query: "" });
  });

  const controller: ExplorerController = {
    get state() {
      return state;
    },
    selectById(id: string | null) {
      state = select(state, bundle, id);
      renderSelection();
    },
    updateFilters(filters: Partial<Filters>) {
      state = setFilters(state, filters);
      renderFilters();
    },
    dispose() {
      document.removeEventListener("mousemove", onMouseMove);
      document.removeEventListener("mouseup", onMouseUp);
      root.innerHTML = "";
    },
  };

  renderAll();
  return controller;
}

/** Replace the container's content with a visible error state. */
export function renderError(root: HTMLElement, message: string): void {
  root.innerHTML = "";
  const box = document.createElement("div");
  box.dataset.role = "error-state";
  box.setAttribute("role", "alert");
  const heading = document.createElement("h2");
  heading.textContent = "Could not load the bundle";
  const body = document.createElement("p");
  body.textContent = message;
  box.append(heading, body);
  root.appendChild(box);
}
