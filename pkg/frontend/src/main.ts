// Application wiring: one EngineClient, one ViewState, refresh-after-curate.

import { ApiError, EngineClient, type EntityDoc } from "./api.js";
import { layoutGraph } from "./layout.js";
import {
  buildFieldRows,
  buildFlowDetail,
  buildGraphView,
  entityIndex,
} from "./model.js";
import {
  renderEnhancements,
  renderFieldRows,
  renderFlowDetail,
  renderGraph,
  renderSearchResults,
  setNotice,
  setOffline,
  el,
} from "./render.js";
import {
  applyEnhancementList,
  applySnapshot,
  initialState,
  select,
  trackEnhancement,
  type ViewState,
} from "./state.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? window.location.origin;
const client = new EngineClient(apiBase);

let state: ViewState = initialState();

const svg = document.querySelector<SVGSVGElement>("#graph")!;
const resultsBox = document.querySelector<HTMLElement>("#results")!;
const inspector = document.querySelector<HTMLElement>("#inspector")!;
const enhancementsBox = document.querySelector<HTMLElement>("#enhancements")!;
const banner = document.querySelector<HTMLElement>("#offline")!;
const noticeBox = document.querySelector<HTMLElement>("#notice")!;
const searchForm = document.querySelector<HTMLFormElement>("#search-form")!;
const searchInput = document.querySelector<HTMLInputElement>("#search-input")!;
const typeSelect = document.querySelector<HTMLSelectElement>("#type-select")!;

async function refresh(): Promise<void> {
  try {
    const snapshot = await client.exportNetwork();
    state = applySnapshot(state, snapshot);
    const docs = await client.enhancements();
    state = applyEnhancementList(state, docs);
    setOffline(banner, false);
  } catch (error) {
    setOffline(banner, true, error instanceof Error ? error.message : "");
  }
  redraw();
}

function redraw(): void {
  setNotice(noticeBox, state.notice);
  if (!state.snapshot) return;
  const view = buildGraphView(state.snapshot);
  const positions = layoutGraph(view, svg.clientWidth || 800, svg.clientHeight || 520);
  renderGraph(svg, view, positions, state.selection, {
    onNodeClick: (bnId) => void selectEntity(bnId),
    onEdgeClick: (bnId) => void selectEntity(bnId),
  });
  renderEnhancements(enhancementsBox, state.pending, (id) => void deployEnhancement(id));
  void renderInspector();
}

async function selectEntity(bnId: string): Promise<void> {
  state = select(state, bnId);
  redraw();
}

async function renderInspector(): Promise<void> {
  inspector.innerHTML = "";
  if (!state.selection || !state.snapshot) {
    inspector.append(el("p", { class: "muted" }, ["select a node or flow"]));
    return;
  }
  const entity = entityIndex(state.snapshot).get(state.selection);
  if (!entity) return;

  let lineage;
  try {
    lineage = await client.lineage(entity.bn_id);
  } catch (error) {
    inspector.append(el("p", { class: "muted" }, ["lineage unavailable"]));
    return;
  }

  if (entity.kind === "MessageFlow") {
    renderFlowDetail(inspector, buildFlowDetail(entity, lineage));
  } else {
    inspector.append(
      el("h3", {}, [`${entity.kind} ${entity.name}`]),
      el("p", { class: "muted" }, [
        `${entity.bn_id} · ${lineage.transformation} from ${lineage.sources.length} record(s)`,
      ]),
    );
  }

  const fieldsBox = el("div");
  inspector.append(fieldsBox);
  renderFieldRows(fieldsBox, buildFieldRows(entity, lineage), (field, value) =>
    void modifyField(entity, field, value),
  );

  inspector.append(el("h4", {}, ["labels"]));
  inspector.append(
    el("p", {}, [entity.labels?.length ? entity.labels.join(", ") : "none"]),
  );
  const labelForm = el("form", { class: "inline" });
  const labelInput = el("input", { placeholder: "new label" });
  const labelButton = el("button", { type: "submit", class: "mini" }, ["add label"]);
  labelForm.append(labelInput, labelButton);
  labelForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (labelInput.value.trim()) {
      void addLabel(entity, labelInput.value.trim());
    }
  });
  inspector.append(labelForm);

  if (entity.kind !== "MessageFlow") {
    const sources = el(
      "ul",
      { class: "contributors" },
      lineage.sources.map((s) => el("li", {}, [s])),
    );
    inspector.append(el("h4", {}, ["source records"]), sources);
  }
}

async function addLabel(entity: EntityDoc, text: string): Promise<void> {
  try {
    await client.addLabel(entity.bn_id, text);
  } catch (error) {
    reportError(error);
    return;
  }
  await refresh(); // the next search sees the label immediately
}

async function modifyField(entity: EntityDoc, field: string, value: string): Promise<void> {
  try {
    const doc = await client.modifyField(entity.bn_id, field, value);
    state = trackEnhancement(state, doc);
  } catch (error) {
    reportError(error);
    return;
  }
  await refresh();
}

async function deployEnhancement(enhancementId: string): Promise<void> {
  try {
    const doc = await client.deploy(enhancementId);
    state = trackEnhancement(state, doc);
  } catch (error) {
    reportError(error);
  }
  redraw();
}

function reportError(error: unknown): void {
  const message =
    error instanceof ApiError
      ? `${error.message}${error.candidates ? ` (${error.candidates.join(", ")})` : ""}`
      : String(error);
  state = { ...state, notice: message };
  setNotice(noticeBox, message);
}

searchForm.addEventListener("submit", (event) => {
  event.preventDefault();
  void runSearch();
});

async function runSearch(): Promise<void> {
  const query = searchInput.value.trim();
  const type = typeSelect.value || undefined;
  if (!query && !type) return;
  try {
    const { results } = await client.search({ query: query || undefined, type });
    renderSearchResults(resultsBox, results, (bnId) => void selectEntity(bnId));
  } catch (error) {
    reportError(error);
  }
}

document.querySelector("#refresh")!.addEventListener("click", () => void refresh());

void refresh();
setInterval(() => void refresh(), 15000);
