/** View-model state and the pure helpers that keep it legal. */

import type { HistoryEntry, PaymentView, SessionView, WireQuery } from "./api.js";

export const CAKE_WIDTH = 600;

export type Phase = "setup" | "gate" | "acting" | "done";

export interface ViewState {
  view: SessionView | null;
  phase: Phase;
  knives: number[];
  selectedPiece: number | null;
  pendingConfirm: boolean;
  passIntent: boolean;
  inFlight: boolean;
  error: string | null;
  lastResults: HistoryEntry[];
  timeoutNote: string | null;
  payment: PaymentView | null;
  questionnaireSent: boolean;
}

export function initialState(): ViewState {
  return {
    view: null,
    phase: "setup",
    knives: [],
    selectedPiece: null,
    pendingConfirm: false,
    passIntent: false,
    inFlight: false,
    error: null,
    lastResults: [],
    timeoutNote: null,
    payment: null,
    questionnaireSent: false,
  };
}

function clamp(value: number, low: number, high: number): number {
  return Math.min(Math.max(Math.round(value), low), high);
}

/** Slider bounds for each knife of the pending query. */
export function knifeBounds(query: WireQuery, index: number): [number, number] {
  switch (query.kind) {
    case "cut":
      return [query.left, query.right];
    case "diminish":
      // a takeover must move the boundary strictly left of the standing one
      return [query.left, (query.standing ?? query.right) - 1];
    case "cut2":
      return [0, CAKE_WIDTH];
    case "split":
      return [query.left, query.right];
    default:
      return [0, CAKE_WIDTH];
  }
}

/** Trim boundaries live inside the selected piece. */
export function trimBounds(query: WireQuery, piece: number): [number, number] {
  const segments = query.pieces[piece];
  const first = segments?.[0];
  if (!first) return [0, CAKE_WIDTH];
  return [first[0] ?? 0, first[1] ?? CAKE_WIDTH];
}

export function knifeCount(kind: string): number {
  if (kind === "cut2" || kind === "split") return 2;
  if (kind === "cut" || kind === "diminish" || kind === "trim") return 1;
  return 0;
}

/** Starting slider positions for a fresh query. */
export function defaultKnives(query: WireQuery): number[] {
  switch (query.kind) {
    case "cut":
    case "diminish": {
      const [low, high] = knifeBounds(query, 0);
      return [clamp(Math.floor((low + high) / 2), low, high)];
    }
    case "cut2": {
      const third = Math.floor(CAKE_WIDTH / 3);
      return [third, 2 * third];
    }
    case "split": {
      const span = query.right - query.left;
      return [
        query.left + Math.floor(span / 3),
        query.left + Math.floor((2 * span) / 3),
      ];
    }
    case "trim":
      return [trimBounds(query, 0)[0]]; // default: shave nothing off piece 0
    default:
      return [];
  }
}

/**
 * Move one knife, clamped to its bounds; two-knife queries keep
 * knife 0 <= knife 1 by pushing the moved knife back to its partner.
 */
export function moveKnife(
  state: ViewState,
  index: number,
  raw: number,
): number[] {
  const query = state.view?.pending;
  if (!query) return state.knives;
  const knives = [...state.knives];
  let [low, high] =
    query.kind === "trim"
      ? trimBounds(query, state.selectedPiece ?? 0)
      : knifeBounds(query, index);
  if (knifeCount(query.kind) === 2) {
    if (index === 0) high = Math.min(high, knives[1] ?? high);
    else low = Math.max(low, knives[0] ?? low);
  }
  knives[index] = clamp(raw, low, high);
  return knives;
}

/** The JSON value the pending query expects from the current controls. */
export function buildActionValue(state: ViewState): unknown {
  const query = state.view?.pending;
  if (!query) throw new Error("no pending query");
  switch (query.kind) {
    case "cut":
      return state.knives[0];
    case "diminish":
      return state.passIntent ? null : state.knives[0];
    case "cut2":
      return [state.knives[0], state.knives[1]];
    case "split":
      return [state.knives[0], state.knives[1], []];
    case "choose":
    case "pick":
      if (state.selectedPiece === null) throw new Error("select a piece first");
      return state.selectedPiece;
    case "trim":
      if (state.selectedPiece === null) throw new Error("select a piece first");
      return [state.selectedPiece, state.knives[0]];
    default:
      throw new Error(`unsupported query kind ${query.kind}`);
  }
}

/** Reset the per-query controls for a newly pending query. */
export function armQuery(state: ViewState): void {
  const query = state.view?.pending;
  state.pendingConfirm = false;
  state.passIntent = false;
  state.error = null;
  if (!query) {
    state.knives = [];
    state.selectedPiece = null;
    return;
  }
  state.selectedPiece =
    query.kind === "choose" || query.kind === "pick" || query.kind === "trim"
      ? 0
      : null;
  state.knives = defaultKnives(query);
}
