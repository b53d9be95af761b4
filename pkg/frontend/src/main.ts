// DOM bootstrap: run picker, queue screen, keyboard shortcuts.

import { ReviewApi } from './api.js';
import { ReviewQueue } from './queue.js';
import { renderQueue, renderRunList } from './render.js';
import type { TripleDto } from './types.js';

const api = new ReviewApi('');
const root = document.getElementById('app') as HTMLElement;

let queue: ReviewQueue | null = null;

function runIdFromHash(): string | null {
  const match = window.location.hash.match(/^#\/runs\/(.+)$/);
  return match ? decodeURIComponent(match[1]) : null;
}

async function showRunList(): Promise<void> {
  queue = null;
  try {
    const { runs } = await api.listRuns();
    root.innerHTML = renderRunList(runs);
  } catch (error) {
    root.innerHTML = `<section class="empty"><h2>Service unreachable</h2>
      <p class="notice network">${String(error)}</p></section>`;
  }
  root.querySelectorAll<HTMLAnchorElement>('.open-run').forEach((link) => {
    link.addEventListener('click', (event) => {
      event.preventDefault();
      window.location.hash = `#/runs/${encodeURIComponent(link.dataset.run ?? '')}`;
    });
  });
}

function paintQueue(): void {
  if (!queue) return;
  root.innerHTML = renderQueue(queue, api.exportUrl(queue.runId));

  const on = (id: string, handler: () => void) => {
    const el = root.querySelector<HTMLElement>(`#${id}`);
    if (el) el.addEventListener('click', handler);
  };
  on('accept', () => void decide('accept'));
  on('reject', () => void decide('reject'));
  on('retry', () => void queue?.retryLast().then(paintQueue));
  on('reload', () => void queue?.load().then(paintQueue));
  on('edit', () => {
    const form = root.querySelector<HTMLFormElement>('#edit-form');
    if (form) form.hidden = !form.hidden;
  });
  on('cancel-edit', () => {
    const form = root.querySelector<HTMLFormElement>('#edit-form');
    if (form) form.hidden = true;
  });
  const form = root.querySelector<HTMLFormElement>('#edit-form');
  if (form) {
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      const data = new FormData(form);
      const current = queue?.current;
      if (!current) return;
      const edited: TripleDto = {
        subject: String(data.get('subject') ?? ''),
        object: String(data.get('object') ?? ''),
        relation: String(data.get('relation') ?? ''),
        source_doc: current.triple.source_doc,
      };
      void decide('edit', edited);
    });
  }
}

async function decide(action: 'accept' | 'reject' | 'edit', edited?: TripleDto): Promise<void> {
  if (!queue) return;
  await queue.decide(action, edited);
  paintQueue();
}

async function showQueue(runId: string): Promise<void> {
  queue = new ReviewQueue(api, runId);
  paintQueue();
  await queue.load();
  paintQueue();
}

document.addEventListener('keydown', (event) => {
  if (!queue || queue.phase !== 'reviewing') return;
  const target = event.target as HTMLElement | null;
  if (target && (target.tagName === 'INPUT' || target.tagName === 'TEXTAREA')) return;
  if (event.key === 'a') void decide('accept');
  if (event.key === 'r') void decide('reject');
  if (event.key === 'e') {
    const form = root.querySelector<HTMLFormElement>('#edit-form');
    if (form) form.hidden = !form.hidden;
  }
});

function route(): void {
  const runId = runIdFromHash();
  if (runId) void showQueue(runId);
  else void showRunList();
}

window.addEventListener('hashchange', route);
route();
