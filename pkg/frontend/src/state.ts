// Minimal observable store; the server stays authoritative and the UI
// re-renders from whole snapshots.

import type { ArtifactRecord, RunRecord, VerificationRecord } from './api.js';

export interface AppState {
  run: RunRecord | null;
  runs: RunRecord[];
  artifacts: Record<string, ArtifactRecord>; // keyed by artifact_id (latest version)
  verifications: Record<string, VerificationRecord[]>; // keyed by artifact_id
  error: { code: string; message: string } | null;
  busy: boolean;
  editing: string | null; // step name with the editor pane open
}

export const initialState: AppState = {
  run: null,
  runs: [],
  artifacts: {},
  verifications: {},
  error: null,
  busy: false,
  editing: null,
};

type Listener = (state: AppState) => void;

export class Store {
  private state: AppState;
  private listeners: Listener[] = [];

  constructor(state: AppState = initialState) {
    this.state = { ...state };
  }

  get(): AppState {
    return this.state;
  }

  set(patch: Partial<AppState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}
