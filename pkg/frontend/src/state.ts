// Client view state. The selection must stay resolvable against the last
// snapshot or be cleared with a visible notice; pending enhancements track
// their server-side deploy status.

import type { EnhancementDoc, ExportDoc } from "./api.js";
import { entityIndex } from "./model.js";

export interface Filters {
  type?: string;
  field?: { name: string; value: string };
}

export interface ViewState {
  selection: string | null;
  notice: string | null;
  filters: Filters;
  pending: EnhancementDoc[];
  snapshot: ExportDoc | null;
}

export function initialState(): ViewState {
  return { selection: null, notice: null, filters: {}, pending: [], snapshot: null };
}

export function select(state: ViewState, bnId: string): ViewState {
  if (state.snapshot && !entityIndex(state.snapshot).has(bnId)) {
    return { ...state, selection: null, notice: `${bnId} is not in the network` };
  }
  return { ...state, selection: bnId, notice: null };
}

export function applySnapshot(state: ViewState, snapshot: ExportDoc): ViewState {
  const next = { ...state, snapshot };
  if (state.selection && !entityIndex(snapshot).has(state.selection)) {
    return {
      ...next,
      selection: null,
      notice: `${state.selection} left the network after a reload`,
    };
  }
  return next;
}

export function setFilters(state: ViewState, filters: Filters): ViewState {
  return { ...state, filters };
}

export function trackEnhancement(state: ViewState, doc: EnhancementDoc): ViewState {
  const pending = state.pending.filter(
    (e) => e.enhancement_id !== doc.enhancement_id,
  );
  pending.push(doc);
  return { ...state, pending };
}

export function applyEnhancementList(
  state: ViewState,
  docs: EnhancementDoc[],
): ViewState {
  return { ...state, pending: docs };
}

export function deployStatus(state: ViewState, enhancementId: string): string {
  const doc = state.pending.find((e) => e.enhancement_id === enhancementId);
  return doc ? doc.status : "unknown";
}
