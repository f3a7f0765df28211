// DOM/SVG rendering. Everything here is presentation; data shaping lives in
// model.ts and all mutations go through the api client.

import type { EnhancementDoc, SearchHit } from "./api.js";
import type { FieldRow, FlowDetail, GraphView } from "./model.js";
import type { Point } from "./layout.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphHandlers {
  onNodeClick: (bnId: string) => void;
  onEdgeClick: (bnId: string) => void;
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    if (name === "class") node.className = value;
    else if (name === "title") node.title = value;
    else node.setAttribute(name, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function renderGraph(
  svg: SVGSVGElement,
  view: GraphView,
  positions: Map<string, Point>,
  selection: string | null,
  handlers: GraphHandlers,
): void {
  svg.innerHTML = "";
  const width = svg.clientWidth || 800;
  const height = svg.clientHeight || 520;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);

  for (const edge of view.edges) {
    const a = positions.get(edge.source);
    const b = positions.get(edge.target);
    if (!a || !b) continue;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("class", `edge${selection === edge.bnId ? " selected" : ""}`);
    line.addEventListener("click", () => handlers.onEdgeClick(edge.bnId));
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${edge.name} (${edge.bnId})`;
    line.append(title);
    svg.append(line);
  }

  for (const node of view.nodes) {
    const p = positions.get(node.bnId);
    if (!p) continue;
    const g = document.createElementNS(SVG_NS, "g");
    g.setAttribute("class", `node${selection === node.bnId ? " selected" : ""}`);
    g.addEventListener("click", () => handlers.onNodeClick(node.bnId));

    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(p.x));
    circle.setAttribute("cy", String(p.y));
    circle.setAttribute("r", "18");
    g.append(circle);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(p.x));
    label.setAttribute("y", String(p.y + 32));
    label.setAttribute("text-anchor", "middle");
    label.textContent = node.name;
    g.append(label);

    if (node.hostNames.length) {
      const host = document.createElementNS(SVG_NS, "text");
      host.setAttribute("x", String(p.x));
      host.setAttribute("y", String(p.y + 46));
      host.setAttribute("text-anchor", "middle");
      host.setAttribute("class", "hostname");
      host.textContent = `@ ${node.hostNames.join(", ")}`;
      g.append(host);
    }
    if (node.labels.length) {
      const badge = document.createElementNS(SVG_NS, "text");
      badge.setAttribute("x", String(p.x));
      badge.setAttribute("y", String(p.y - 26));
      badge.setAttribute("text-anchor", "middle");
      badge.setAttribute("class", "labels");
      badge.textContent = node.labels.join(" · ");
      g.append(badge);
    }
    svg.append(g);
  }
}

export function renderSearchResults(
  container: HTMLElement,
  hits: SearchHit[],
  onPick: (bnId: string) => void,
): void {
  container.innerHTML = "";
  if (!hits.length) {
    container.append(el("p", { class: "muted" }, ["no matches"]));
    return;
  }
  for (const hit of hits) {
    const row = el("button", { class: "result", type: "button" }, [
      el("span", { class: "kind" }, [hit.kind]),
      ` ${hit.name} `,
      el("span", { class: "muted" }, [hit.bn_id]),
    ]);
    row.addEventListener("click", () => onPick(hit.bn_id));
    container.append(row);
  }
}

// Field table: hovering a value shows its traced contributor; user-provided
// values wear a provenance badge.
export function renderFieldRows(
  container: HTMLElement,
  rows: FieldRow[],
  onEdit: (field: string, value: string) => void,
): void {
  container.innerHTML = "";
  const table = el("table", { class: "fields" });
  for (const row of rows) {
    const valueCell = el("td", { title: `from ${row.contributor}` }, [row.value]);
    if (row.userProvided) {
      valueCell.append(" ", el("span", { class: "badge user", title: "user-provided value" }, ["user"]));
    }
    const editButton = el("button", { class: "mini", type: "button" }, ["edit"]);
    editButton.addEventListener("click", () => {
      const next = window.prompt(`New value for ${row.field}`, row.value);
      if (next !== null) onEdit(row.field, next);
    });
    table.append(
      el("tr", {}, [
        el("td", { class: "muted" }, [row.field]),
        valueCell,
        el("td", {}, [editButton]),
      ]),
    );
  }
  container.append(table);
}

export function renderFlowDetail(container: HTMLElement, detail: FlowDetail): void {
  container.innerHTML = "";
  container.append(
    el("h3", {}, [`flow ${detail.name}`]),
    el("p", { class: "muted" }, [
      `${detail.endpoints.source} -> ${detail.endpoints.target} · ${detail.transformation}`,
    ]),
    el("h4", {}, ["contributing records"]),
    el(
      "ul",
      { class: "contributors" },
      detail.contributors.map((source) => el("li", {}, [source])),
    ),
  );
}

export function renderEnhancements(
  container: HTMLElement,
  docs: EnhancementDoc[],
  onDeploy: (enhancementId: string) => void,
): void {
  container.innerHTML = "";
  if (!docs.length) {
    container.append(el("p", { class: "muted" }, ["no enhancements"]));
    return;
  }
  for (const doc of docs) {
    const row = el("div", { class: `enhancement ${doc.status}` }, [
      el("span", { class: "muted" }, [doc.enhancement_id]),
      ` ${doc.op} ${doc.target ?? ""} ${doc.field ?? ""} `,
      el("span", { class: `badge ${doc.status}` }, [doc.status]),
    ]);
    if (doc.warning) {
      row.append(" ", el("span", { class: "muted" }, [doc.warning]));
    }
    if (doc.status === "pending" && doc.plans.length) {
      const deployButton = el("button", { class: "mini", type: "button" }, ["deploy"]);
      deployButton.addEventListener("click", () => onDeploy(doc.enhancement_id));
      row.append(" ", deployButton);
    }
    container.append(row);
  }
}

export function setOffline(banner: HTMLElement, offline: boolean, detail = ""): void {
  banner.hidden = !offline;
  if (offline) {
    banner.textContent = `engine unreachable${detail ? `: ${detail}` : ""} — showing last snapshot`;
  }
}

export function setNotice(element: HTMLElement, notice: string | null): void {
  element.hidden = !notice;
  element.textContent = notice ?? "";
}
