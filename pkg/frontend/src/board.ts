// Run board: one card per pipeline step, rendered in canonical order from
// the server's run record. The engine's approval gate decides which controls
// exist: the UI only ever offers actions the server would accept, and every
// action round-trips through the API before anything on screen changes.

import { api, ApiError } from './api.js';
import type { ArtifactRecord, RunRecord, StepState, VerificationRecord } from './api.js';
import { diffLines, diffStats } from './diff.js';
import type { Store } from './state.js';

export interface BoardOptions {
  reviewer?: string;
}

const STEP_LABELS: Record<string, string> = {
  InteractionReq: 'Interaction layer requirements',
  BusinessReq: 'Business logic requirements',
  DataConfigReq: 'Data & configuration requirements',
  Consolidate: 'Consolidated requirements',
  DataModelSql: 'Data model & SQL',
  OrmObjects: 'ORM objects',
  ApiCode: 'API code',
  TestCases: 'Test cases',
  UiCode: 'UI code',
};

export function actionableStep(run: RunRecord): StepState | null {
  for (const state of run.steps) {
    if (state.status !== 'Approved') return state;
  }
  return null;
}

export async function refreshRun(store: Store, runId: string): Promise<void> {
  const run = await api.getRun(runId);
  const artifacts: Record<string, ArtifactRecord> = {};
  const verifications: Record<string, VerificationRecord[]> = {};
  for (const state of run.steps) {
    if (!state.artifact_id) continue;
    const listing = await api.listArtifacts();
    const row = listing.artifacts.find((r) => r.artifact_id === state.artifact_id);
    if (!row) continue;
    artifacts[state.artifact_id] = await api.getArtifact(
      state.artifact_id,
      row.latest_version,
    );
    const result = await api.verificationsFor(state.artifact_id, row.latest_version);
    verifications[state.artifact_id] = result.verifications;
  }
  store.set({ run, artifacts, verifications, error: null });
}

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

async function perform(store: Store, runId: string, action: () => Promise<unknown>) {
  store.set({ busy: true });
  try {
    await action();
    await refreshRun(store, runId); // server state is the only truth
    store.set({ busy: false, editing: null });
  } catch (err) {
    // Failure mutates nothing locally beyond the error banner; the board
    // re-fetches so a race (e.g. another session approved first) surfaces.
    const apiError = err instanceof ApiError
      ? { code: err.code, message: err.message }
      : { code: 'NetworkError', message: String(err) };
    try {
      await refreshRun(store, runId);
    } catch {
      // keep the previous snapshot when even the refresh fails
    }
    store.set({ busy: false, error: apiError });
  }
}

function verificationBadge(records: VerificationRecord[]): HTMLElement {
  const wrap = el('div', 'verification');
  const latest = records[records.length - 1];
  const badge = el(
    'span',
    `badge badge-verify ${latest.report.passed ? 'badge-pass' : 'badge-warn'}`,
    `${latest.mode} similarity ${latest.report.score.toFixed(2)} ` +
      `(threshold ${latest.report.threshold}) — advisory`,
  );
  const toggle = el('button', 'link-button', 'token detail');
  toggle.dataset.role = 'verify-detail-toggle';
  const detail = el('pre', 'verify-detail');
  detail.hidden = true;
  detail.textContent =
    `left tokens: ${latest.report.left_token_count}\n` +
    `right tokens: ${latest.report.right_token_count}\n` +
    `missing: ${latest.report.missing_tokens.join(', ') || '(none)'}`;
  toggle.addEventListener('click', () => {
    detail.hidden = !detail.hidden;
  });
  wrap.append(badge, toggle, detail);
  return wrap;
}

function renderEditor(
  store: Store,
  runId: string,
  state: StepState,
  artifact: ArtifactRecord,
  options: BoardOptions,
): HTMLElement {
  const pane = el('div', 'editor-pane');
  const textarea = el('textarea', 'editor-text');
  textarea.dataset.role = 'editor';
  textarea.value = artifact.body;
  const preview = el('div', 'diff-preview');
  preview.dataset.role = 'diff-preview';

  const renderPreview = () => {
    const lines = diffLines(artifact.body, textarea.value);
    const stats = diffStats(lines);
    preview.innerHTML = '';
    preview.append(
      el('div', 'diff-stats', `+${stats.added} −${stats.removed}`),
    );
    for (const line of lines) {
      if (line.kind === 'same') continue;
      const row = el('div', `diff-line diff-${line.kind}`);
      row.textContent = `${line.kind === 'added' ? '+' : '-'} ${line.text}`;
      preview.append(row);
    }
  };
  textarea.addEventListener('input', renderPreview);
  renderPreview();

  const submit = el('button', 'action', 'Approve with edits');
  submit.dataset.action = 'approve-edits';
  submit.addEventListener('click', () =>
    perform(store, runId, () =>
      api.reviewStep(runId, state.step, 'Approve', textarea.value, options.reviewer),
    ),
  );
  const cancel = el('button', 'link-button', 'Cancel');
  cancel.addEventListener('click', () => store.set({ editing: null }));

  pane.append(textarea, preview, submit, cancel);
  return pane;
}

function renderStepCard(
  store: Store,
  run: RunRecord,
  state: StepState,
  options: BoardOptions,
): HTMLElement {
  const snapshot = store.get();
  const actionable = actionableStep(run);
  const isActionable = actionable !== null && actionable.step === state.step;

  const card = el('section', `step-card status-${state.status.toLowerCase()}`);
  card.dataset.step = state.step;
  card.dataset.status = state.status;
  if (isActionable) card.classList.add('actionable');

  const header = el('header', 'step-header');
  header.append(
    el('h3', 'step-title', STEP_LABELS[state.step] ?? state.step),
    el('span', `badge badge-${state.status.toLowerCase()}`, state.status),
  );
  if (state.attempt_count > 0) {
    header.append(el('span', 'attempts', `attempt ${state.attempt_count}`));
  }
  card.append(header);

  const artifact = state.artifact_id ? snapshot.artifacts[state.artifact_id] : undefined;
  if (artifact) {
    const panes = el('div', 'artifact-panes');
    const bodyPane = el('div', 'pane pane-body');
    bodyPane.append(el('h4', undefined, `Artifact v${artifact.version} (${artifact.provenance})`));
    const body = el('pre', 'artifact-body');
    body.dataset.role = 'artifact-body';
    body.textContent = artifact.body; // byte-identical to the stored version
    bodyPane.append(body);
    panes.append(bodyPane);

    const explanationPane = el('div', 'pane pane-explanation');
    explanationPane.append(el('h4', undefined, 'Explanation'));
    const explanation = el('pre', 'artifact-explanation');
    explanation.textContent = artifact.explanation || '(none provided)';
    explanationPane.append(explanation);
    panes.append(explanationPane);
    card.append(panes);

    const records = snapshot.verifications[artifact.artifact_id] ?? [];
    if (records.length > 0) card.append(verificationBadge(records));

    if (artifact.version > 1 || state.status === 'Approved') {
      const history = el('div', 'version-history');
      history.textContent = `versions 1…${artifact.version}`;
      card.append(history);
    }
  }

  // Controls exist only where the approval gate allows the action.
  const actions = el('div', 'actions');
  actions.dataset.role = 'actions';
  if (isActionable && (state.status === 'Pending' || state.status === 'Rejected')) {
    const generate = el(
      'button',
      'action action-primary',
      state.status === 'Rejected' ? 'Regenerate' : 'Generate',
    );
    generate.dataset.action = 'generate';
    generate.addEventListener('click', () =>
      perform(store, run.run_id, () => api.generateStep(run.run_id, state.step)),
    );
    actions.append(generate);
  }
  if (state.status === 'Generated') {
    const approveButton = el('button', 'action action-primary', 'Approve');
    approveButton.dataset.action = 'approve';
    approveButton.addEventListener('click', () =>
      perform(store, run.run_id, () =>
        api.reviewStep(run.run_id, state.step, 'Approve', undefined, options.reviewer),
      ),
    );
    const rejectButton = el('button', 'action', 'Reject');
    rejectButton.dataset.action = 'reject';
    rejectButton.addEventListener('click', () =>
      perform(store, run.run_id, () =>
        api.reviewStep(run.run_id, state.step, 'Reject', undefined, options.reviewer),
      ),
    );
    const repairButton = el('button', 'action', 'Repair');
    repairButton.dataset.action = 'repair';
    repairButton.addEventListener('click', () =>
      perform(store, run.run_id, () => api.repairStep(run.run_id, state.step)),
    );
    const editButton = el('button', 'action', 'Edit');
    editButton.dataset.action = 'edit';
    editButton.addEventListener('click', () => store.set({ editing: state.step }));
    actions.append(approveButton, rejectButton, repairButton, editButton);
  }
  if (actions.childElementCount > 0) card.append(actions);

  if (state.status === 'Generated' && snapshot.editing === state.step && artifact) {
    card.append(renderEditor(store, run.run_id, state, artifact, options));
  }

  return card;
}

export function renderRunBoard(
  root: HTMLElement,
  store: Store,
  options: BoardOptions = {},
): void {
  const snapshot = store.get();
  root.innerHTML = '';

  if (snapshot.error) {
    const banner = el('div', 'error-banner');
    banner.dataset.role = 'error-banner';
    banner.textContent = `${snapshot.error.code}: ${snapshot.error.message}`;
    root.append(banner);
  }

  const run = snapshot.run;
  if (!run) {
    root.append(el('p', 'empty-state', 'No run open. Create or select a run.'));
    return;
  }

  const heading = el('div', 'run-heading');
  heading.append(
    el('h2', undefined, `${run.phase} — ${run.module_tag}`),
    el('code', 'run-id', run.run_id),
  );
  root.append(heading);

  const done = run.steps.every((s) => s.status === 'Approved');
  if (done) {
    const complete = el('div', 'completion');
    complete.dataset.role = 'completion';
    complete.append(el('strong', undefined, 'All steps approved.'));
    for (const state of run.steps) {
      if (!state.artifact_id) continue;
      const artifact = snapshot.artifacts[state.artifact_id];
      if (!artifact) continue;
      const link = el('a', 'export-link', `export ${state.step}`);
      link.href = `/artifacts/${state.artifact_id}/${artifact.version}`;
      complete.append(link);
    }
    root.append(complete);
  }

  const board = el('div', 'board');
  for (const state of run.steps) {
    board.append(renderStepCard(store, run, state, options));
  }
  root.append(board);
}
