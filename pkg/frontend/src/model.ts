// View-model builders: turn engine documents into what the panels render.
// Pure functions; the DOM layer consumes their output.

import type { EntityDoc, ExportDoc, LineageDoc } from "./api.js";
import { USER_MARKER } from "./api.js";

export interface GraphNode {
  bnId: string;
  name: string;
  labels: string[];
  hostNames: string[];
}

export interface GraphEdge {
  bnId: string; // the flow entity
  source: string;
  target: string;
  name: string;
}

export interface GraphView {
  nodes: GraphNode[];
  edges: GraphEdge[];
  hosts: Map<string, string[]>; // host bn id -> hosted participant bn ids
}

export function buildGraphView(doc: ExportDoc): GraphView {
  const hostNames = new Map<string, string>();
  for (const entity of doc.entities) {
    if (entity.kind === "Host") hostNames.set(entity.bn_id, entity.name);
  }
  const hostsByParticipant = new Map<string, string[]>();
  const hosted = new Map<string, string[]>();
  for (const edge of doc.runs_on) {
    const names = hostsByParticipant.get(edge.participant) ?? [];
    names.push(hostNames.get(edge.host) ?? edge.host);
    hostsByParticipant.set(edge.participant, names);
    const members = hosted.get(edge.host) ?? [];
    members.push(edge.participant);
    hosted.set(edge.host, members);
  }

  const nodes = doc.entities
    .filter((e) => e.kind === "Participant")
    .map((e) => ({
      bnId: e.bn_id,
      name: e.name,
      labels: e.labels ?? [],
      hostNames: hostsByParticipant.get(e.bn_id) ?? [],
    }));
  const edges = doc.flows.map((f) => ({
    bnId: f.bn_id,
    source: f.source ?? "",
    target: f.target ?? "",
    name: f.name,
  }));
  return { nodes, edges, hosts: hosted };
}

export interface FieldRow {
  field: string;
  value: string;
  contributor: string; // rendered source key, or the user marker
  userProvided: boolean;
}

// The inspector: every displayed value carries its traced contributor.
export function buildFieldRows(entity: EntityDoc, lineage: LineageDoc): FieldRow[] {
  const rows: FieldRow[] = [];
  for (const [field, value] of Object.entries(entity.attributes)) {
    const contributor = lineage.field_contributions[field] ?? "";
    rows.push({
      field,
      value,
      contributor,
      userProvided: contributor === USER_MARKER,
    });
  }
  rows.sort((a, b) => a.field.localeCompare(b.field));
  return rows;
}

export interface FlowDetail {
  bnId: string;
  name: string;
  endpoints: { source: string; target: string };
  transformation: string;
  contributors: string[];
  fields: FieldRow[];
}

export function buildFlowDetail(flow: EntityDoc, lineage: LineageDoc): FlowDetail {
  return {
    bnId: flow.bn_id,
    name: flow.name,
    endpoints: { source: flow.source ?? "", target: flow.target ?? "" },
    transformation: lineage.transformation,
    contributors: [...lineage.sources].sort(),
    fields: buildFieldRows(flow, lineage),
  };
}

export function entityIndex(doc: ExportDoc): Map<string, EntityDoc> {
  const index = new Map<string, EntityDoc>();
  for (const entity of [...doc.entities, ...doc.flows]) {
    index.set(entity.bn_id, entity);
  }
  return index;
}
