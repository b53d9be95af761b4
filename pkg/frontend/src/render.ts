// HTML for each screen as pure string builders; main.ts mounts them.

import type { ReviewQueue } from './queue.js';
import type { RunStats, RunSummary } from './types.js';
import { contextHtml, escapeHtml, toViewModel } from './viewmodel.js';

export function renderRunList(runs: RunSummary[]): string {
  if (runs.length === 0) {
    return `<section class="empty">
      <h2>No review runs yet</h2>
      <p>Create one with <code>POST /runs</code> from a relations run file.</p>
    </section>`;
  }
  const rows = runs
    .map(
      (run) => `<tr data-run="${escapeHtml(run.run_id)}">
        <td><a href="#" class="open-run" data-run="${escapeHtml(run.run_id)}">${escapeHtml(run.run_id)}</a></td>
        <td>${run.pending}</td><td>${run.accepted}</td><td>${run.rejected}</td>
        <td>${run.edited}</td><td>${run.total}</td>
      </tr>`,
    )
    .join('');
  return `<section>
    <h2>Review runs</h2>
    <table class="runs">
      <thead><tr><th>run</th><th>pending</th><th>accepted</th><th>rejected</th><th>edited</th><th>total</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </section>`;
}

export function renderProgress(stats: RunStats | null): string {
  if (!stats) return '';
  const done = stats.decided;
  const rate = stats.acceptance_rate === null ? 'n/a' : `${Math.round(stats.acceptance_rate * 100)}%`;
  return `<div class="progress">
    <span>${done}/${stats.total} decided</span>
    <span>accepted ${stats.accepted} · edited ${stats.edited} · rejected ${stats.rejected}</span>
    <span>acceptance ${rate}</span>
  </div>`;
}

export function renderQueue(queue: ReviewQueue, exportUrl: string): string {
  if (queue.phase === 'loading') return `<section class="empty"><p>Loading…</p></section>`;
  if (queue.phase === 'failed') {
    return `<section class="empty">
      <h2>Could not load run</h2>
      <p class="notice network">${escapeHtml(queue.notice?.message ?? '')}</p>
      <button id="reload">Reload</button>
    </section>`;
  }
  if (queue.phase === 'done' || !queue.current) {
    return `<section class="empty">
      <h2>All items decided</h2>
      ${renderProgress(queue.stats)}
      <p><a href="${escapeHtml(exportUrl)}" id="export-link">Export accepted triples</a></p>
    </section>`;
  }

  const vm = toViewModel(queue.current);
  const noticeHtml = queue.notice
    ? `<p class="notice ${queue.notice.kind}">${escapeHtml(queue.notice.message)}
        ${queue.retry ? '<button id="retry">Retry</button>' : ''}</p>`
    : '';
  return `<section class="queue">
    ${renderProgress(queue.stats)}
    ${noticeHtml}
    <article class="item" data-item="${escapeHtml(vm.id)}">
      <header>
        <span class="badge ${vm.status}">${vm.status}</span>
        <span class="item-id">${escapeHtml(vm.id)}</span>
        <span class="source">from ${escapeHtml(vm.sourceDoc || 'unknown document')}</span>
      </header>
      <p class="triple">
        <strong class="subject">${escapeHtml(vm.subject)}</strong>
        <em class="relation">${escapeHtml(vm.relation)}</em>
        <strong class="object">${escapeHtml(vm.object)}</strong>
      </p>
      <blockquote class="context">${contextHtml(vm)}</blockquote>
      <div class="actions">
        <button id="accept" title="shortcut: a">Accept</button>
        <button id="reject" title="shortcut: r">Reject</button>
        <button id="edit" title="shortcut: e">Edit…</button>
      </div>
      <form id="edit-form" class="edit-form" hidden>
        <label>subject <input name="subject" value="${escapeHtml(vm.subject)}"></label>
        <label>object <input name="object" value="${escapeHtml(vm.object)}"></label>
        <label>relation <input name="relation" value="${escapeHtml(vm.relation)}"></label>
        <button type="submit">Save edit</button>
        <button type="button" id="cancel-edit">Cancel</button>
      </form>
    </article>
  </section>`;
}
