/** Application controller: wires the API client, state, and renderer. */

import {
  ApiError,
  Client,
  type ActionReply,
  type CreateSessionRequest,
} from "./api.js";
import {
  armQuery,
  buildActionValue,
  initialState,
  moveKnife,
  trimBounds,
  type ViewState,
} from "./state.js";
import { render, type Handlers } from "./render.js";

const newActionId = (): string =>
  globalThis.crypto?.randomUUID?.() ??
  `${Math.random().toString(36).slice(2)}-${Date.now().toString(36)}`;

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return `request failed: ${String(err)}`;
}

export class App {
  readonly state: ViewState = initialState();
  readonly client: Client;

  private readonly root: HTMLElement;
  private readonly config: CreateSessionRequest;
  private readonly handlers: Handlers;
  /** Idempotency key for the armed action; reused verbatim on a retry. */
  private actionId: string | null = null;
  /** Serialises async work so DOM events never interleave requests. */
  private chain: Promise<void> = Promise.resolve();

  constructor(root: HTMLElement, base: string, config: CreateSessionRequest = {}) {
    this.root = root;
    this.client = new Client(base);
    this.config = config;
    this.handlers = {
      onStart: (subject) => this.enqueue(() => this.start(subject)),
      onKnife: (index, value) => this.knife(index, value),
      onPiece: (index) => this.piece(index),
      onPass: () => this.pass(),
      onSubmit: () => this.submit(),
      onNextRound: () => this.nextRound(),
      onQuestionnaire: (blob) => this.enqueue(() => this.questionnaire(blob)),
    };
    this.render();
  }

  /** Resolves once every queued request has settled (for scripted drivers). */
  async idle(): Promise<void> {
    let seen: Promise<void>;
    do {
      seen = this.chain;
      await seen;
    } while (seen !== this.chain);
  }

  private render(): void {
    render(this.root, this.state, this.handlers);
  }

  private enqueue(work: () => void | Promise<void>): void {
    this.chain = this.chain.then(work).then(
      () => undefined,
      (err) => {
        this.state.error = describe(err);
        this.state.inFlight = false;
        this.render();
      },
    );
  }

  // -- control events --------------------------------------------------------

  private disarm(): void {
    this.state.pendingConfirm = false;
    this.state.passIntent = false;
    this.actionId = null;
  }

  private knife(index: number, value: number): void {
    if (this.state.inFlight) return;
    this.state.knives = moveKnife(this.state, index, value);
    this.disarm(); // the value changed, so any confirmation is stale
    this.state.error = null;
    this.render();
  }

  private piece(index: number): void {
    const state = this.state;
    if (state.inFlight) return;
    state.selectedPiece = index;
    const query = state.view?.pending;
    if (query?.kind === "trim") state.knives = [trimBounds(query, index)[0]];
    this.disarm();
    state.error = null;
    this.render();
  }

  private arm(pass: boolean): void {
    this.state.pendingConfirm = true;
    this.state.passIntent = pass;
    if (!this.actionId) this.actionId = newActionId();
    this.render();
  }

  private submit(): void {
    const state = this.state;
    if (!state.view?.pending || state.inFlight) return;
    if (!state.pendingConfirm) {
      this.arm(false);
      return;
    }
    this.fire();
  }

  private pass(): void {
    const state = this.state;
    if (!state.view?.pending || state.inFlight) return;
    if (!(state.pendingConfirm && state.passIntent)) {
      this.arm(true);
      return;
    }
    this.fire();
  }

  private fire(): void {
    const state = this.state;
    let value: unknown;
    try {
      value = buildActionValue(state);
    } catch (err) {
      state.error = (err as Error).message;
      this.render();
      return;
    }
    const id = this.actionId ?? newActionId();
    this.actionId = id;
    state.inFlight = true;
    state.error = null;
    this.render();
    this.enqueue(async () => {
      try {
        const reply = await this.client.postAction(
          state.view!.session, value, id);
        this.actionId = null;
        this.disarm();
        this.apply(reply);
      } catch (err) {
        // keep actionId and the confirmation armed: one click retries safely
        state.error = describe(err);
      } finally {
        state.inFlight = false;
        this.render();
      }
    });
  }

  private nextRound(): void {
    const state = this.state;
    if (!state.view?.pending) return;
    state.timeoutNote = null;
    state.phase = "acting";
    armQuery(state);
    this.actionId = null;
    this.render();
  }

  // -- server exchanges -------------------------------------------------------

  private async start(subject: string): Promise<void> {
    const state = this.state;
    try {
      const view = await this.client.createSession({ ...this.config, subject });
      state.view = view;
      state.error = null;
      state.phase = view.done ? "done" : "gate";
    } catch (err) {
      state.error = describe(err);
    }
    this.render();
  }

  private apply(reply: ActionReply): void {
    const state = this.state;
    state.view = reply.view;
    switch (reply.outcome) {
      case "next_query":
        state.phase = "acting";
        armQuery(state);
        break;
      case "round_result":
        state.lastResults = reply.result ? [reply.result] : [];
        state.phase = "gate";
        break;
      case "procedure_done":
      case "session_done": {
        const results = reply.results ?? [];
        state.lastResults = results;
        state.timeoutNote =
          results.length > 1
            ? `Time ran out: ${results.length} round(s) of ` +
              `${reply.procedure ?? "the procedure"} scored 0.`
            : null;
        state.phase = reply.view.done ? "done" : "gate";
        if (reply.view.done && reply.view.payment_available) {
          this.fetchPayment();
        }
        break;
      }
      case "questionnaire_stored":
        state.questionnaireSent = true;
        break;
    }
  }

  private fetchPayment(): void {
    this.enqueue(async () => {
      try {
        this.state.payment =
          await this.client.getPayment(this.state.view!.session);
      } catch {
        this.state.payment = null;
      }
      this.render();
    });
  }

  private async questionnaire(blob: unknown): Promise<void> {
    const state = this.state;
    try {
      const reply = await this.client.postQuestionnaire(
        state.view!.session, blob);
      this.apply(reply);
    } catch (err) {
      state.error = describe(err);
    }
    this.render();
  }
}

export function mount(
  root: HTMLElement,
  base: string,
  config: CreateSessionRequest = {},
): App {
  return new App(root, base, config);
}
