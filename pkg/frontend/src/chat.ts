/** Chat view: ask questions, inspect the retrieved-fact evidence behind
 * each answer, and record one good/bad verdict per turn. */

import { ApiError, type ApiLike, type EvolutionSummary, type Verdict } from "./api.js";
import {
  applyVerdict,
  canSubmitFeedback,
  lockTurn,
  markAnswered,
  markFailed,
  newTurn,
  type ChatTurn,
} from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface ChatCallbacks {
  onEvolution?: (summary: EvolutionSummary) => void;
  onTurnsChanged?: () => void;
}

export class ChatView {
  readonly turns: ChatTurn[] = [];
  private sessionId: string | undefined;
  private readonly turnsBox: HTMLElement;
  private readonly input: HTMLInputElement;
  private readonly optionsInput: HTMLInputElement;
  private readonly submitButton: HTMLButtonElement;
  private readonly pending = new Set<Promise<unknown>>();

  constructor(
    root: HTMLElement,
    private readonly api: ApiLike,
    private readonly callbacks: ChatCallbacks = {},
  ) {
    this.turnsBox = el("div", "turns");
    const form = el("form", "ask-form");
    this.input = el("input", "question-input");
    this.input.placeholder = "Ask a question";
    this.optionsInput = el("input", "options-input");
    this.optionsInput.placeholder = "Options, | separated (optional)";
    this.submitButton = el("button", "ask-submit", "Ask");
    this.submitButton.type = "submit";
    this.submitButton.disabled = true;
    form.append(this.input, this.optionsInput, this.submitButton);
    root.append(this.turnsBox, form);

    this.input.addEventListener("input", () => {
      this.submitButton.disabled = this.input.value.trim().length === 0;
    });
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = this.input.value.trim();
      if (!text) return;
      const options = this.optionsInput.value
        .split("|")
        .map((o) => o.trim())
        .filter((o) => o.length > 0);
      this.input.value = "";
      this.submitButton.disabled = true;
      this.track(this.submitQuestion(text, options.length ? options : undefined));
    });
  }

  /** Awaits every in-flight ask/feedback; used by tests and teardown. */
  async settle(): Promise<void> {
    while (this.pending.size > 0) {
      await Promise.allSettled([...this.pending]);
    }
  }

  private track<T>(promise: Promise<T>): Promise<T> {
    this.pending.add(promise);
    promise.finally(() => this.pending.delete(promise)).catch(() => undefined);
    return promise;
  }

  async submitQuestion(text: string, options?: string[]): Promise<ChatTurn> {
    const turn = newTurn(text, options);
    this.turns.push(turn);
    this.render();
    await this.runAsk(turn);
    return turn;
  }

  private async runAsk(turn: ChatTurn): Promise<void> {
    turn.status = "asking";
    turn.error = undefined;
    this.render();
    try {
      const response = await this.api.ask(turn.question, turn.options, this.sessionId);
      this.sessionId = response.session_id;
      markAnswered(turn, response);
    } catch (error) {
      markFailed(turn, error instanceof Error ? error.message : String(error));
    }
    this.render();
    this.callbacks.onTurnsChanged?.();
  }

  async submitFeedback(turn: ChatTurn, verdict: Verdict): Promise<void> {
    // single-shot: reject anything past the first accepted click
    if (!canSubmitFeedback(turn) || !turn.response) return;
    turn.feedbackInFlight = true;
    this.render();
    try {
      const result = await this.api.feedback(
        turn.response.session_id,
        turn.response.question_id,
        verdict,
      );
      applyVerdict(turn, verdict);
      lockTurn(turn);
      turn.lastEvolution = result.evolution;
      turn.feedbackNote = `+${result.evolution.added} triples added`;
      this.callbacks.onEvolution?.(result.evolution);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        turn.feedbackNote = "already recorded";
        lockTurn(turn);
      } else {
        turn.feedbackNote = `feedback failed: ${
          error instanceof Error ? error.message : String(error)
        }`;
      }
    } finally {
      turn.feedbackInFlight = false;
    }
    this.render();
  }

  retry(turn: ChatTurn): Promise<void> {
    return this.track(this.runAsk(turn));
  }

  private render(): void {
    while (this.turnsBox.firstChild) this.turnsBox.removeChild(this.turnsBox.firstChild);
    for (const turn of this.turns) {
      this.turnsBox.appendChild(this.renderTurn(turn));
    }
  }

  private renderTurn(turn: ChatTurn): HTMLElement {
    const card = el("article", "turn");
    card.appendChild(el("p", "turn-question", turn.question));

    if (turn.status === "asking") {
      card.appendChild(el("p", "turn-status", "asking..."));
      return card;
    }
    if (turn.status === "failed") {
      card.appendChild(el("p", "turn-status turn-error", `failed: ${turn.error ?? "unknown"}`));
      const retryButton = el("button", "turn-retry", "Retry");
      retryButton.addEventListener("click", () => this.retry(turn));
      card.appendChild(retryButton);
      return card; // no verdict buttons on a failed turn
    }

    const response = turn.response!;
    const answerRow = el("div", "turn-answer");
    answerRow.appendChild(el("span", `badge ${response.confidence}`, response.confidence));
    answerRow.appendChild(el("span", "answer-text", String(response.answer)));
    answerRow.appendChild(el("span", "turn-depth", `depth ${response.depth_used}`));
    answerRow.appendChild(el("span", "turn-evidence", response.evidence));
    card.appendChild(answerRow);
    if (response.support_info) {
      card.appendChild(el("p", "support-info", response.support_info));
    }

    const panel = el("table", "evidence-panel");
    const head = el("thead");
    const headRow = el("tr");
    for (const title of ["head", "relation", "tail"]) {
      headRow.appendChild(el("th", undefined, title));
    }
    head.appendChild(headRow);
    const body = el("tbody");
    for (const triple of response.triples) {
      const row = el("tr", "evidence-row");
      row.appendChild(el("td", undefined, triple.head));
      row.appendChild(el("td", undefined, triple.relation));
      row.appendChild(el("td", undefined, triple.tail));
      body.appendChild(row);
    }
    panel.append(head, body);
    card.appendChild(panel);
    if (response.triples.length === 0) {
      card.appendChild(el("p", "evidence-empty", "no retrieved facts; answered from model knowledge"));
    }

    const controls = el("div", "verdict-controls");
    const good = el("button", "verdict-good", "Good Response");
    const bad = el("button", "verdict-bad", "Bad Response");
    const active = canSubmitFeedback(turn);
    good.disabled = !active;
    bad.disabled = !active;
    good.addEventListener("click", () => this.track(this.submitFeedback(turn, "good")));
    bad.addEventListener("click", () => this.track(this.submitFeedback(turn, "bad")));
    controls.append(good, bad);
    card.appendChild(controls);

    if (turn.verdict !== "pending") {
      card.appendChild(el("span", "verdict-state", turn.verdict));
    }
    if (turn.feedbackNote) {
      card.appendChild(el("p", "feedback-note", turn.feedbackNote));
    }
    return card;
  }
}
