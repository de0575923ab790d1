/** Fold a session event log into display-ready timeline entries. */

import type { SessionEvent } from "./types.js";

export interface MessageEntry {
  kind: "message";
  seq: number;
  role: string;
  text: string;
}

export interface ToolEntry {
  kind: "tool";
  seq: number;
  tool: string;
  args: unknown[];
  /** Rendered result line; undefined while the call is still in flight. */
  result?: string;
}

export interface WarningEntry {
  kind: "warning";
  seq: number;
  /** Warning number 1-4, parsed from the canonical message; 0 if unparseable. */
  badge: number;
  message: string;
}

export interface OutcomeEntry {
  kind: "outcome";
  seq: number;
  label: string;
  explanation: string;
  toolCalls: number;
  warnings: Record<string, number>;
}

export interface PlanStepEntry {
  kind: "plan_step";
  seq: number;
  status: string;
  statement: string;
  detail: string;
}

export interface AskEntry {
  kind: "ask";
  seq: number;
  question: string;
  answered: boolean;
}

export interface UtteranceEntry {
  kind: "utterance";
  seq: number;
  text: string;
}

export type TimelineEntry =
  | MessageEntry
  | ToolEntry
  | WarningEntry
  | OutcomeEntry
  | PlanStepEntry
  | AskEntry
  | UtteranceEntry;

export interface Timeline {
  entries: TimelineEntry[];
  /** Question text of an ask with no later resolution, or null. */
  pendingAsk: string | null;
  outcomes: OutcomeEntry[];
  lastSeq: number;
}

const WARNING_BADGE = /^Warning (\d):/;

export function foldTimeline(events: SessionEvent[]): Timeline {
  const entries: TimelineEntry[] = [];
  const outcomes: OutcomeEntry[] = [];
  // Unresolved calls per tool name, so each result attaches to its own call
  // even when one message issues several calls before any result arrives.
  const openCalls = new Map<string, ToolEntry[]>();
  let pending: AskEntry | null = null;
  let lastSeq = 0;

  for (const event of events) {
    lastSeq = Math.max(lastSeq, event.seq);
    const p = event.payload as Record<string, any>;
    switch (event.kind) {
      case "llm_message": {
        entries.push({ kind: "message", seq: event.seq, role: p.role, text: p.content });
        break;
      }
      case "tool_call": {
        const entry: ToolEntry = {
          kind: "tool",
          seq: event.seq,
          tool: p.tool,
          args: p.args ?? [],
        };
        entries.push(entry);
        const queue = openCalls.get(entry.tool) ?? [];
        queue.push(entry);
        openCalls.set(entry.tool, queue);
        break;
      }
      case "tool_result": {
        const queue = openCalls.get(p.tool);
        const call = queue?.shift();
        if (call) {
          call.result = p.message;
        } else {
          // A result with no matching call still deserves a row.
          entries.push({ kind: "tool", seq: event.seq, tool: p.tool, args: [], result: p.message });
        }
        break;
      }
      case "warning": {
        const match = WARNING_BADGE.exec(p.message ?? "");
        entries.push({
          kind: "warning",
          seq: event.seq,
          badge: match ? Number(match[1]) : 0,
          message: p.message,
        });
        break;
      }
      case "outcome": {
        const entry: OutcomeEntry = {
          kind: "outcome",
          seq: event.seq,
          label: p.label,
          explanation: p.explanation ?? "",
          toolCalls: p.tool_call_count ?? 0,
          warnings: p.warnings ?? {},
        };
        entries.push(entry);
        outcomes.push(entry);
        if (pending) {
          pending.answered = true;
          pending = null;
        }
        break;
      }
      case "ask_pending": {
        const entry: AskEntry = {
          kind: "ask",
          seq: event.seq,
          question: p.question,
          answered: false,
        };
        entries.push(entry);
        pending = entry;
        break;
      }
      case "plan_step": {
        entries.push({
          kind: "plan_step",
          seq: event.seq,
          status: p.status,
          statement: p.statement ?? "",
          detail: p.detail ?? "",
        });
        // Any step after the ask means the plan resumed with an answer.
        if (pending && p.status !== "asked") {
          pending.answered = true;
          pending = null;
        }
        break;
      }
      case "utterance": {
        entries.push({ kind: "utterance", seq: event.seq, text: p.text });
        break;
      }
      case "scene_changed":
        break; // handled by the scene panel, not the timeline
    }
  }

  return { entries, pendingAsk: pending ? pending.question : null, outcomes, lastSeq };
}
