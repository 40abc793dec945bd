/** Typed fetch client for the session service. */

export interface WireQuery {
  agent: number;
  kind: string;
  procedure: string;
  n_agents: number;
  left: number;
  right: number;
  stage: number;
  group_size: number;
  standing: number | null;
  pieces: number[][][];
  trimmed_index: number | null;
  prompt: string;
}

export interface WireAction {
  actor: number;
  query_kind: string;
  value: unknown;
  t_ms: number;
}

export interface HistoryEntry {
  procedure: string;
  round: number;
  revealed: boolean;
  own_points: number;
  all_points: number[] | null;
  allocation: number[][];
  subject_view_of_pieces: number[];
  actions: WireAction[];
}

export interface SessionView {
  session: string;
  subject: string;
  done: boolean;
  procedure: string | null;
  display_name: string | null;
  instructions: string | null;
  round: number | null;
  rounds: number;
  reveal_round: number;
  revealed: boolean;
  pending: WireQuery | null;
  own_intervals: number[][];
  opponent_intervals: number[][][] | null;
  history: HistoryEntry[];
  remaining_time_s: number | null;
  payment_available: boolean;
}

export interface ActionReply {
  outcome:
    | "next_query"
    | "round_result"
    | "procedure_done"
    | "session_done"
    | "questionnaire_stored";
  view: SessionView;
  result?: HistoryEntry;
  results?: HistoryEntry[];
  procedure?: string;
}

export interface PaymentView {
  session: string;
  base_pounds: number;
  bonus_pounds: number;
  total_pounds: number;
  drawn_rounds: { procedure: string; round: number; points: number }[];
}

export interface CreateSessionRequest {
  subject?: string;
  procedures?: string[];
  rounds?: number;
  reveal_round?: number;
  seed?: number;
  enforce_time?: boolean;
  time_limit_s?: number;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail = (body as { detail?: { message?: string } }).detail;
    throw new ApiError(response.status, detail?.message ?? response.statusText);
  }
  return body as T;
}

export class Client {
  constructor(readonly base: string) {}

  createSession(config: CreateSessionRequest): Promise<SessionView> {
    return request(`${this.base}/sessions`, {
      method: "POST",
      body: JSON.stringify(config),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return request(`${this.base}/sessions/${id}`);
  }

  postAction(
    id: string,
    value: unknown,
    actionId: string,
  ): Promise<ActionReply> {
    return request(`${this.base}/sessions/${id}/actions`, {
      method: "POST",
      body: JSON.stringify({ value, action_id: actionId }),
    });
  }

  postQuestionnaire(id: string, blob: unknown): Promise<ActionReply> {
    return request(`${this.base}/sessions/${id}/actions`, {
      method: "POST",
      body: JSON.stringify({ questionnaire: blob }),
    });
  }

  getPayment(id: string): Promise<PaymentView> {
    return request(`${this.base}/sessions/${id}/payment`);
  }
}
