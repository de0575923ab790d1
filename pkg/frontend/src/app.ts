/** Browser entry: wires the timeline and scene panel to a live session. */

import { ConsoleClient } from "./client.js";
import { applySceneEvent, emptyScenePanel, type ScenePanel } from "./scene.js";
import { foldTimeline, type TimelineEntry } from "./timeline.js";
import type { SessionEvent } from "./types.js";

const STATUS_ICON: Record<string, string> = {
  ok: "[ok]",
  refused: "[refused]",
  asked: "[?]",
  said: "[say]",
};

export function renderEntry(entry: TimelineEntry): string {
  switch (entry.kind) {
    case "message":
      return `<div class="msg msg-${entry.role}">${escapeHtml(entry.text)}</div>`;
    case "tool": {
      const result = entry.result ? escapeHtml(entry.result) : "&hellip;";
      return (
        `<div class="tool"><code>${escapeHtml(entry.tool)}(${escapeHtml(
          JSON.stringify(entry.args),
        )})</code><div class="tool-result">${result}</div></div>`
      );
    }
    case "warning":
      return `<div class="warning"><span class="badge">W${entry.badge}</span> ${escapeHtml(entry.message)}</div>`;
    case "outcome":
      return (
        `<div class="outcome outcome-${entry.label}"><strong>${entry.label}</strong>` +
        ` ${escapeHtml(entry.explanation)}</div>`
      );
    case "plan_step":
      return (
        `<div class="plan-step">${STATUS_ICON[entry.status] ?? entry.status} ` +
        `<code>${escapeHtml(entry.statement)}</code> ${escapeHtml(entry.detail)}</div>`
      );
    case "ask":
      return `<div class="ask${entry.answered ? " answered" : ""}">${escapeHtml(entry.question)}</div>`;
    case "utterance":
      return `<div class="utterance">robot: ${escapeHtml(entry.text)}</div>`;
  }
}

export function renderScenePanel(panel: ScenePanel): string {
  const rows = panel.objects
    .map((o) => {
      const free = panel.paths[o.id];
      const path = free === undefined ? "" : free ? " path-free" : " path-blocked";
      return `<li class="object${path}">${escapeHtml(o.id)} @ [${o.center.join(", ")}]</li>`;
    })
    .join("");
  const holding = panel.holding ? `holding ${escapeHtml(panel.holding)}` : "gripper empty";
  return `<div class="scene"><p>${holding}</p><ul>${rows}</ul></div>`;
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function mountConsole(root: HTMLElement, baseUrl: string, sessionId: string): void {
  const client = new ConsoleClient(baseUrl);
  const events: SessionEvent[] = [];
  let scene = emptyScenePanel();

  const timelineEl = document.createElement("div");
  const sceneEl = document.createElement("div");
  const askForm = document.createElement("form");
  askForm.innerHTML = '<input name="answer" placeholder="answer"><button>Send</button>';
  askForm.hidden = true;
  root.append(sceneEl, timelineEl, askForm);

  const redraw = () => {
    const timeline = foldTimeline(events);
    timelineEl.innerHTML = timeline.entries.map(renderEntry).join("");
    sceneEl.innerHTML = renderScenePanel(scene);
    askForm.hidden = timeline.pendingAsk === null;
  };

  askForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const input = askForm.elements.namedItem("answer") as HTMLInputElement;
    if (input.value.trim()) {
      void client.submitAnswer(sessionId, input.value.trim());
      input.value = "";
    }
  });

  void client.followEvents(sessionId, 1, (event) => {
    events.push(event);
    scene = applySceneEvent(scene, event);
    redraw();
  });
}
