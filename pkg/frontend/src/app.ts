import { createExplorer, renderError } from "./render.js";
import { parseBundle } from "./validate.js";

const BUNDLE_URL = "astra_bundle.json";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  try {
    const response = await fetch(BUNDLE_URL);
    if (!response.ok) throw new Error(`HTTP ${response.status} for ${BUNDLE_URL}`);
    const bundle = parseBundle(await response.json());
    createExplorer(root, bundle);
  } catch (error) {
    renderError(root, error instanceof Error ? error.message : String(error));
  }
}

void boot();
