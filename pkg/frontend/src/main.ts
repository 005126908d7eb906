// Bootstrap: toolbar for creating/selecting runs plus the board, with a
// periodic refresh of the open run so concurrent sessions stay visible.

import { api, ApiError, setApiBase } from './api.js';
import { refreshRun, renderRunBoard } from './board.js';
import type { BoardOptions } from './board.js';
import { Store } from './state.js';

export interface AppOptions extends BoardOptions {
  apiBase?: string;
  refreshMs?: number; // 0 disables the background refresh
}

export interface AppHandle {
  store: Store;
  openRun(runId: string): Promise<void>;
  createExtractionRun(): Promise<void>;
  createGenerationRun(source: string): Promise<void>;
  dispose(): void;
}

export function mountApp(root: HTMLElement, options: AppOptions = {}): AppHandle {
  if (options.apiBase) setApiBase(options.apiBase);
  const store = new Store();
  const refreshMs = options.refreshMs ?? 5000;

  root.innerHTML = '';
  const toolbar = document.createElement('div');
  toolbar.className = 'toolbar';

  const newExtraction = document.createElement('button');
  newExtraction.textContent = 'New extraction run';
  newExtraction.dataset.role = 'new-extraction-run';

  const sourceInput = document.createElement('input');
  sourceInput.placeholder = 'approved consolidation artifact id';
  sourceInput.dataset.role = 'generation-source';

  const newGeneration = document.createElement('button');
  newGeneration.textContent = 'New build run';
  newGeneration.dataset.role = 'new-generation-run';

  const picker = document.createElement('select');
  picker.dataset.role = 'run-picker';

  toolbar.append(newExtraction, sourceInput, newGeneration, picker);
  const boardRoot = document.createElement('div');
  boardRoot.dataset.role = 'board-root';
  root.append(toolbar, boardRoot);

  const sync = () => {
    renderRunBoard(boardRoot, store, options);
    const snapshot = store.get();
    picker.innerHTML = '';
    for (const run of snapshot.runs) {
      const option = document.createElement('option');
      option.value = run.run_id;
      option.textContent = `${run.phase} ${run.run_id}`;
      option.selected = snapshot.run?.run_id === run.run_id;
      picker.append(option);
    }
  };
  const unsubscribe = store.subscribe(sync);
  sync();

  const openRun = async (runId: string) => {
    await refreshRun(store, runId);
  };

  const refreshRunList = async () => {
    const listing = await api.listRuns();
    store.set({ runs: listing.runs });
  };

  newExtraction.addEventListener('click', () => {
    void (async () => {
      const run = await api.createRun('RequirementsExtraction');
      await refreshRunList();
      await openRun(run.run_id);
    })();
  });

  newGeneration.addEventListener('click', () => {
    void (async () => {
      try {
        const run = await api.createRun('ApplicationGeneration', sourceInput.value.trim());
        await refreshRunList();
        await openRun(run.run_id);
      } catch (err) {
        // surface the engine error code verbatim; nothing local changes
        const banner = err instanceof ApiError
          ? { code: err.code, message: err.message }
          : { code: 'NetworkError', message: String(err) };
        store.set({ error: banner });
      }
    })();
  });

  picker.addEventListener('change', () => {
    if (picker.value) void openRun(picker.value);
  });

  let timer: ReturnType<typeof setInterval> | null = null;
  if (refreshMs > 0) {
    timer = setInterval(() => {
      const current = store.get().run;
      if (current && !store.get().busy) void refreshRun(store, current.run_id);
    }, refreshMs);
  }

  void refreshRunList();

  return {
    store,
    openRun,
    createExtractionRun: async () => {
      const run = await api.createRun('RequirementsExtraction');
      await refreshRunList();
      await openRun(run.run_id);
    },
    createGenerationRun: async (source: string) => {
      const run = await api.createRun('ApplicationGeneration', source);
      await refreshRunList();
      await openRun(run.run_id);
    },
    dispose: () => {
      if (timer) clearInterval(timer);
      unsubscribe();
    },
  };
}

declare global {
  interface Window {
    modernkitApp?: AppHandle;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  window.modernkitApp = mountApp(document.getElementById('app')!, {
    apiBase: '',
  });
}
