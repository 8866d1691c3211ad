/** Chat turn state. The verdict moves pending -> good|bad exactly once and
 * then locks; every transition attempt past that is rejected so at most one
 * feedback request can ever leave the client per turn. */

import type { AskResponse, EvolutionSummary, Verdict } from "./api.js";

export type TurnStatus = "asking" | "answered" | "failed";
export type VerdictState = "pending" | "good" | "bad" | "locked";

export interface ChatTurn {
  question: string;
  options?: string[];
  status: TurnStatus;
  error?: string;
  response?: AskResponse;
  verdict: VerdictState;
  feedbackInFlight: boolean;
  lastEvolution?: EvolutionSummary;
  feedbackNote?: string;
}

export function newTurn(question: string, options?: string[]): ChatTurn {
  return {
    question,
    options,
    status: "asking",
    verdict: "pending",
    feedbackInFlight: false,
  };
}

export function markAnswered(turn: ChatTurn, response: AskResponse): void {
  turn.status = "answered";
  turn.response = response;
  turn.error = undefined;
}

export function markFailed(turn: ChatTurn, error: string): void {
  turn.status = "failed";
  turn.error = error;
}

export function canSubmitFeedback(turn: ChatTurn): boolean {
  return turn.status === "answered" && turn.verdict === "pending" && !turn.feedbackInFlight;
}

/** Record a verdict; returns false (and changes nothing) if the turn has
 * already left the pending state. */
export function applyVerdict(turn: ChatTurn, verdict: Verdict): boolean {
  if (turn.verdict !== "pending") return false;
  turn.verdict = verdict;
  return true;
}

export function lockTurn(turn: ChatTurn): void {
  turn.verdict = "locked";
}

/** Retrieval-depth counts over this session's answered turns. */
export function depthHistogram(turns: ChatTurn[]): Map<number, number> {
  const histogram = new Map<number, number>();
  for (const turn of turns) {
    if (turn.status === "answered" && turn.response) {
      const depth = turn.response.depth_used;
      histogram.set(depth, (histogram.get(depth) ?? 0) + 1);
    }
  }
  return histogram;
}
