/** DOM rendering: rebuild the page from the current ViewState. */

import type { HistoryEntry } from "./api.js";
import {
  CAKE_WIDTH,
  knifeCount,
  trimBounds,
  knifeBounds,
  type ViewState,
} from "./state.js";

export interface Handlers {
  onStart(subject: string): void;
  onKnife(index: number, value: number): void;
  onPiece(index: number): void;
  onPass(): void;
  onSubmit(): void;
  onNextRound(): void;
  onQuestionnaire(blob: unknown): void;
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  node.append(...children);
  return node;
}

function testid(id: string): Record<string, string> {
  return { "data-testid": id };
}

// -- pieces of the page ------------------------------------------------------

function setupForm(handlers: Handlers): HTMLElement {
  const input = el("input", {
    ...testid("subject-input"),
    placeholder: "your name",
    value: "subject",
  }) as HTMLInputElement;
  const button = el("button", testid("start-button"), "Start session");
  button.addEventListener("click", () => handlers.onStart(input.value || "subject"));
  return el("div", { class: "setup" }, el("h1", {}, "Cake division"), input, button);
}

function cakeBar(state: ViewState): HTMLElement {
  const view = state.view!;
  const bar = el("div", {
    ...testid("cake-bar"),
    class: "cake-bar",
    style: `position:relative;width:${CAKE_WIDTH}px;height:48px;` +
      "background:#eee;border:1px solid #999;",
  });
  for (const segment of view.own_intervals) {
    const [start = 0, end = 0] = segment;
    bar.append(
      el("div", {
        ...testid("desired-segment"),
        class: "desired",
        style: `position:absolute;left:${start}px;width:${end - start}px;` +
          "top:0;height:100%;background:#4caf50;",
        title: `you want [${start}, ${end})`,
      }),
    );
  }
  if (view.opponent_intervals) {
    view.opponent_intervals.forEach((intervals, opponent) => {
      for (const segment of intervals) {
        const [start = 0, end = 0] = segment;
        bar.append(
          el("div", {
            ...testid("opponent-overlay"),
            class: "overlay",
            style: `position:absolute;left:${start}px;width:${end - start}px;` +
              `top:${8 + opponent * 14}px;height:10px;` +
              "background:repeating-linear-gradient(45deg,#d32f2f,#d32f2f 4px,transparent 4px,transparent 8px);",
            title: `player ${opponent + 2} wants [${start}, ${end})`,
          }),
        );
      }
    });
  }
  state.knives.forEach((position, index) => {
    bar.append(
      el("div", {
        ...testid(`knife-marker-${index}`),
        class: "knife",
        style: `position:absolute;left:${position}px;top:-6px;height:60px;` +
          "width:2px;background:#111;",
      }),
    );
  });
  return bar;
}

function pieceLabel(piece: number[][]): string {
  if (!piece.length) return "(empty)";
  return piece.map(([s, e]) => `[${s}, ${e})`).join(" + ");
}

function controls(state: ViewState, handlers: Handlers): HTMLElement {
  const query = state.view?.pending;
  const box = el("div", { ...testid("controls"), class: "controls" });
  if (!query) {
    const idle = el("button", testid("submit-button"), "Submit") as
      HTMLButtonElement;
    idle.disabled = true;
    box.append(idle);
    return box;
  }
  box.append(el("p", testid("query-prompt"), query.prompt));

  const knives = knifeCount(query.kind);
  for (let index = 0; index < knives; index += 1) {
    const [low, high] =
      query.kind === "trim"
        ? trimBounds(query, state.selectedPiece ?? 0)
        : knifeBounds(query, index);
    const slider = el("input", {
      ...testid(`knife-slider-${index}`),
      type: "range",
      min: String(low),
      max: String(high),
      value: String(state.knives[index] ?? low),
    }) as HTMLInputElement;
    slider.addEventListener("input", () =>
      handlers.onKnife(index, Number(slider.value)));
    box.append(
      el("label", {}, `knife ${index + 1}: `, slider,
        el("span", testid(`knife-value-${index}`),
          String(state.knives[index] ?? low))),
    );
  }

  if (query.kind === "choose" || query.kind === "pick" || query.kind === "trim") {
    const list = el("div", testid("piece-choices"));
    query.pieces.forEach((piece, index) => {
      const button = el(
        "button",
        {
          ...testid(`piece-button-${index}`),
          "aria-pressed": String(state.selectedPiece === index),
        },
        `piece ${index + 1}: ${pieceLabel(piece)}`,
      );
      button.addEventListener("click", () => handlers.onPiece(index));
      list.append(button);
    });
    box.append(list);
  }

  if (query.kind === "diminish") {
    const pass = el("button", testid("pass-button"),
      state.passIntent && state.pendingConfirm ? "Confirm pass" : "Pass");
    pass.addEventListener("click", () => handlers.onPass());
    box.append(pass);
  }

  const submit = el("button", testid("submit-button"),
    state.pendingConfirm && !state.passIntent ? "Confirm" : "Submit") as
    HTMLButtonElement;
  submit.disabled = state.inFlight || !state.view?.pending;
  submit.addEventListener("click", () => handlers.onSubmit());
  box.append(submit);
  return box;
}

function resultsPanel(state: ViewState): HTMLElement | null {
  const view = state.view;
  if (!view || (view.history.length === 0 && state.lastResults.length === 0)) {
    return null; // nothing played yet: no panel at all
  }
  const panel = el("div", { ...testid("results-panel"), class: "results" });
  const latest = state.lastResults[state.lastResults.length - 1];
  if (latest) {
    panel.append(
      el("p", testid("result-own-points"), String(latest.own_points)),
      el("p", {}, `round ${latest.round} of ${latest.procedure}: ` +
        `your piece is worth ${latest.own_points} to you`),
    );
    const others = el("ul", testid("result-piece-values"));
    latest.subject_view_of_pieces.forEach((worth, agent) => {
      if (agent === 0) return;
      others.append(
        el("li", testid(`result-agent-${agent}`),
          `player ${agent + 1}'s piece would be worth ${worth} to you`),
      );
    });
    panel.append(others);
    if (latest.all_points) {
      panel.append(el("p", testid("revealed-points"),
        `scores by each player's own valuation: ${latest.all_points.join(", ")}`));
    }
  }
  const history = el("ol", testid("history-list"));
  for (const entry of view.history) {
    history.append(
      el("li", testid("history-item"),
        `${entry.procedure} round ${entry.round}: ${entry.own_points}`),
    );
  }
  panel.append(history);
  return panel;
}

function questionnaireForm(state: ViewState, handlers: Handlers): HTMLElement {
  if (state.questionnaireSent) {
    return el("p", testid("questionnaire-done"), "Thanks — your answers were stored.");
  }
  const procedures = [...new Set(state.view!.history.map((e) => e.procedure))];
  const text = el("textarea", testid("q-free-text")) as HTMLTextAreaElement;
  const selects = new Map<string, HTMLSelectElement>();
  const rows = procedures.map((procedure) => {
    const select = el("select", testid(`q-rating-${procedure}`)) as
      HTMLSelectElement;
    for (const rating of [1, 2, 3, 4]) {
      select.append(el("option", { value: String(rating) }, String(rating)));
    }
    selects.set(procedure, select);
    return el("label", {}, `${procedure} fairness (1-4): `, select);
  });
  const send = el("button", testid("q-submit"), "Send answers");
  send.addEventListener("click", () => {
    const ratings: Record<string, number> = {};
    for (const [procedure, select] of selects) {
      ratings[procedure] = Number(select.value);
    }
    handlers.onQuestionnaire({ comments: text.value, ratings });
  });
  return el("div", { ...testid("questionnaire-form"), class: "questionnaire" },
    el("h3", {}, "Optional: how fair did the procedures feel?"),
    text, ...rows, send);
}

function donePanel(state: ViewState, handlers: Handlers): HTMLElement {
  const box = el("div", testid("session-done"),
    el("h2", {}, "Session complete"));
  if (state.payment) {
    box.append(
      el("p", testid("payment-box"),
        `payment: £${state.payment.total_pounds.toFixed(2)} ` +
        `(£${state.payment.base_pounds.toFixed(2)} + two drawn rounds)`),
    );
  }
  box.append(questionnaireForm(state, handlers));
  return box;
}

// -- the page ----------------------------------------------------------------

export function render(root: HTMLElement, state: ViewState, handlers: Handlers): void {
  root.replaceChildren();
  if (state.phase === "setup" || !state.view) {
    root.append(setupForm(handlers));
    if (state.error) root.append(el("p", testid("error-box"), state.error));
    return;
  }
  const view = state.view;

  const header = el("div", { class: "header" });
  if (view.procedure) {
    header.append(
      el("h1", testid("procedure-name"), view.display_name ?? view.procedure),
      el("p", testid("instructions"), view.instructions ?? ""),
      el("p", testid("round-indicator"), `Round ${view.round} of ${view.rounds}`),
    );
  }
  if (view.remaining_time_s !== null) {
    header.append(el("p", testid("time-remaining"),
      `${Math.ceil(view.remaining_time_s)} s left in this procedure`));
  }
  root.append(header);

  if (state.timeoutNote) {
    root.append(el("p", testid("timeout-note"), state.timeoutNote));
  }
  if (state.error) root.append(el("p", testid("error-box"), state.error));

  const panel = resultsPanel(state);
  if (panel) root.append(panel);

  if (state.phase === "done") {
    root.append(donePanel(state, handlers));
    return;
  }

  root.append(cakeBar(state));

  if (state.phase === "gate") {
    const next = el("button", testid("next-round-button"),
      `Start round ${view.round} of ${view.display_name ?? view.procedure}`);
    next.addEventListener("click", () => handlers.onNextRound());
    root.append(next);
    return;
  }
  root.append(controls(state, handlers));
}
