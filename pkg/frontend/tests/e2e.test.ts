/**
 * End-to-end: spawn the real session service, then drive a complete
 * eight-procedure, seven-round session purely through DOM interactions.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { App } from "../src/app.js";

const PORT = 8100 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, "..", "..");

let server: ChildProcess;
let serverLog = "";
let traceDir: string;

async function sleep(ms: number): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 120; attempt += 1) {
    try {
      const probe = await fetch(`${BASE}/fixtures/profiles`);
      if (probe.ok) return;
    } catch {
      // not listening yet
    }
    if (server.exitCode !== null) break;
    await sleep(300);
  }
  throw new Error(`session service never came up on ${BASE}\n${serverLog}`);
}

beforeAll(async () => {
  traceDir = mkdtempSync(join(tmpdir(), "fairslice-e2e-"));
  server = spawn(
    "python3",
    [
      "-m", "fairslice.cli", "serve",
      "--port", String(PORT),
      "--host", "127.0.0.1",
      "--trace-dir", traceDir,
      "--no-time-limit",
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk) => { serverLog += String(chunk); });
  server.stderr?.on("data", (chunk) => { serverLog += String(chunk); });
  await waitForServer();
}, 60_000);

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGTERM");
    for (let i = 0; i < 20 && server.exitCode === null; i += 1) await sleep(100);
    if (server.exitCode === null) server.kill("SIGKILL");
  }
});

// -- DOM driving helpers --------------------------------------------------------

function find(root: HTMLElement, testid: string): HTMLElement {
  const node = root.querySelector(`[data-testid=${testid}]`);
  if (!node) throw new Error(`missing [data-testid=${testid}]`);
  return node as HTMLElement;
}

function setSlider(root: HTMLElement, index: number, value: number): void {
  const slider = find(root, `knife-slider-${index}`) as HTMLInputElement;
  slider.value = String(value);
  slider.dispatchEvent(new Event("input", { bubbles: true }));
}

/** Answer the pending query with a legal move, through the controls only. */
async function act(app: App, root: HTMLElement): Promise<void> {
  const query = app.state.view?.pending;
  if (!query) throw new Error("acting phase without a pending query");
  switch (query.kind) {
    case "cut":
      setSlider(root, 0, Math.floor((query.left + query.right) / 2));
      break;
    case "cut2":
      setSlider(root, 0, 200);
      setSlider(root, 1, 400);
      break;
    case "split":
      break; // the two default knives are already legal
    case "choose":
    case "pick":
    case "trim":
      find(root, "piece-button-0").click();
      break;
    case "diminish": {
      find(root, "pass-button").click(); // arm the pass
      find(root, "pass-button").click(); // confirm it
      await app.idle();
      return;
    }
    default:
      throw new Error(`no driver for query kind ${query.kind}`);
  }
  find(root, "submit-button").click(); // arm
  find(root, "submit-button").click(); // confirm
  await app.idle();
}

interface DisplayedResult {
  procedure: string;
  round: number;
  points: number;
}

/** Read the freshly displayed round result off the page, if one is showing. */
function readDisplayedResult(app: App, root: HTMLElement): DisplayedResult | null {
  const node = root.querySelector("[data-testid=result-own-points]");
  const latest = app.state.lastResults[app.state.lastResults.length - 1];
  if (!node || !latest) return null;
  return {
    procedure: latest.procedure,
    round: latest.round,
    points: Number(node.textContent),
  };
}

// -- the session ------------------------------------------------------------------

describe("full session through the UI", () => {
  it("completes 8 procedures x 7 rounds with faithful displays and a gated reveal",
    async () => {
      const root = document.createElement("div");
      document.body.append(root);
      const app = new App(root, BASE);

      // setup screen -> create the session
      const name = find(root, "subject-input") as HTMLInputElement;
      name.value = "e2e-subject";
      find(root, "start-button").click();
      await app.idle();
      expect(app.state.view?.session).toBeTruthy();
      const sessionId = app.state.view!.session;
      expect(app.state.view?.rounds).toBe(7);
      expect(app.state.view?.reveal_round).toBe(6);

      const displayed: DisplayedResult[] = [];
      const revealedProcedures = new Set<string>();
      let steps = 0;

      while (app.state.phase !== "done") {
        steps += 1;
        if (steps > 5000) throw new Error("session did not terminate");
        if (app.state.phase === "gate") {
          const result = readDisplayedResult(app, root);
          if (result) displayed.push(result);
          find(root, "next-round-button").click();
          await app.idle();
          continue;
        }
        expect(app.state.phase).toBe("acting");
        const round = app.state.view!.round!;
        const overlays = root.querySelectorAll(
          "[data-testid=opponent-overlay]").length;
        if (round < app.state.view!.reveal_round) {
          expect(overlays, `round ${round} must hide opponents`).toBe(0);
        } else {
          expect(overlays, `round ${round} must show opponents`)
            .toBeGreaterThan(0);
          revealedProcedures.add(app.state.view!.procedure!);
        }
        await act(app, root);
      }

      const final = readDisplayedResult(app, root);
      if (final) displayed.push(final);

      // every procedure reached its reveal rounds with overlays showing
      expect(revealedProcedures.size).toBe(8);

      // the session is really finished
      expect(app.state.view?.done).toBe(true);
      expect(root.querySelector("[data-testid=session-done]")).toBeTruthy();
      expect(app.state.view?.history.length).toBe(56);

      // every displayed per-round total matches the server's trace exactly
      const wire = await fetch(`${BASE}/sessions/${sessionId}`);
      expect(wire.ok).toBe(true);
      const serverView = await wire.json() as {
        history: { procedure: string; round: number; own_points: number }[];
      };
      expect(serverView.history.length).toBe(56);
      expect(displayed.length).toBe(56);
      serverView.history.forEach((entry, index) => {
        expect(displayed[index]).toEqual({
          procedure: entry.procedure,
          round: entry.round,
          points: entry.own_points,
        });
      });

      // payment arrives on the done screen
      await app.idle();
      const payment = find(root, "payment-box");
      expect(payment.textContent).toContain("£");
      expect(app.state.payment!.total_pounds)
        .toBeGreaterThanOrEqual(5);

      // the questionnaire posts and lands in the stored trace
      const text = find(root, "q-free-text") as HTMLTextAreaElement;
      text.value = "the two-player ones felt fairest";
      find(root, "q-submit").click();
      await app.idle();
      expect(app.state.questionnaireSent).toBe(true);
      expect(root.querySelector("[data-testid=questionnaire-done]"))
        .toBeTruthy();
      const lines = readFileSync(join(traceDir, `${sessionId}.jsonl`), "utf8")
        .trim().split("\n").map((line) => JSON.parse(line));
      const stored = lines.find((line) =>
        typeof line === "object" && line !== null && "questionnaire" in line);
      expect(stored?.questionnaire?.comments)
        .toBe("the two-player ones felt fairest");
    },
    180_000);
});
