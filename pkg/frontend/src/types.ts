/** Wire types for the session service's event stream and REST endpoints. */

export type EventKind =
  | "scene_changed"
  | "llm_message"
  | "tool_call"
  | "tool_result"
  | "warning"
  | "outcome"
  | "plan_step"
  | "ask_pending"
  | "utterance";

export interface SessionEvent {
  seq: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export type SessionState =
  | "idle"
  | "detecting"
  | "awaiting_answer"
  | "executing_plan"
  | "done";

export interface SessionInfo {
  id: string;
  state: SessionState;
  events: number;
  pending_ask: string | null;
}

export interface SceneSnapshot {
  mutation: { kind: string; [key: string]: unknown } | null;
  snapshot: Record<string, unknown>;
  relations: Array<{ subject: string; relation: string; object: string }>;
  paths: Record<string, boolean>;
}
