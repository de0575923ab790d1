/** Scene panel model: track the latest snapshot and path indicators. */

import type { SceneSnapshot, SessionEvent } from "./types.js";

export interface ObjectRow {
  id: string;
  name: string;
  center: [number, number, number];
  states: Record<string, boolean>;
}

export interface ScenePanel {
  objects: ObjectRow[];
  holding: string | null;
  /** Per-object free-path indicator: true means the robot can approach it. */
  paths: Record<string, boolean>;
  relations: Array<{ subject: string; relation: string; object: string }>;
  lastMutation: { kind: string; [key: string]: unknown } | null;
  /** Count of snapshots applied, for change highlighting. */
  revision: number;
}

export function emptyScenePanel(): ScenePanel {
  return { objects: [], holding: null, paths: {}, relations: [], lastMutation: null, revision: 0 };
}

export function applySceneEvent(panel: ScenePanel, event: SessionEvent): ScenePanel {
  if (event.kind !== "scene_changed") return panel;
  const payload = event.payload as unknown as SceneSnapshot;
  const snapshot = payload.snapshot as Record<string, any>;
  const objects: ObjectRow[] = (snapshot.objects ?? []).map((o: any) => ({
    id: o.id,
    name: o.name ?? o.id,
    center: o.box.center,
    states: o.states ?? {},
  }));
  return {
    objects,
    holding: snapshot.robot?.holding ?? null,
    paths: payload.paths ?? {},
    relations: payload.relations ?? [],
    lastMutation: payload.mutation,
    revision: panel.revision + 1,
  };
}

export function foldScene(events: SessionEvent[]): ScenePanel {
  return events.reduce(applySceneEvent, emptyScenePanel());
}
