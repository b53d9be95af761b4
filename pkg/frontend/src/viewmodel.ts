// Map service items to what the queue screen renders. Pure functions only.

import type { ItemDto, ItemStatus, TripleDto } from './types.js';

export interface Highlight {
  start: number;
  end: number;
  kind: 'subject' | 'object';
}

export interface ItemViewModel {
  id: string;
  subject: string;
  object: string;
  relation: string;
  sourceDoc: string;
  context: string;
  highlights: Highlight[];
  status: ItemStatus;
  /** Values shown when the item was edited; displayed instead of the original. */
  display: TripleDto;
}

/** First case-insensitive occurrence of `needle` not overlapping `taken`. */
function findUnclaimed(
  haystack: string,
  needle: string,
  taken: Highlight[],
): { start: number; end: number } | null {
  if (!needle) return null;
  const lowered = haystack.toLowerCase();
  const target = needle.toLowerCase();
  let from = 0;
  while (from <= lowered.length - target.length) {
    const start = lowered.indexOf(target, from);
    if (start < 0) return null;
    const end = start + target.length;
    const overlaps = taken.some((h) => !(end <= h.start || start >= h.end));
    if (!overlaps) return { start, end };
    from = start + 1;
  }
  return null;
}

/**
 * Highlight ranges for subject and object in the context excerpt.
 * Absent terms simply produce no highlight; this never throws.
 */
export function computeHighlights(context: string, subject: string, object: string): Highlight[] {
  const highlights: Highlight[] = [];
  const subjectHit = findUnclaimed(context, subject, highlights);
  if (subjectHit) highlights.push({ ...subjectHit, kind: 'subject' });
  const objectHit = findUnclaimed(context, object, highlights);
  if (objectHit) highlights.push({ ...objectHit, kind: 'object' });
  highlights.sort((a, b) => a.start - b.start);
  return highlights;
}

export function toViewModel(item: ItemDto): ItemViewModel {
  const display = item.status === 'edited' && item.edited_triple ? item.edited_triple : item.triple;
  return {
    id: item.id,
    subject: item.triple.subject,
    object: item.triple.object,
    relation: item.triple.relation,
    sourceDoc: item.triple.source_doc,
    context: item.context_excerpt,
    highlights: computeHighlights(item.context_excerpt, item.triple.subject, item.triple.object),
    status: item.status,
    display,
  };
}

const ESCAPES: Record<string, string> = {
  '&': '&amp;',
  '<': '&lt;',
  '>': '&gt;',
  '"': '&quot;',
  "'": '&#39;',
};

export function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (ch) => ESCAPES[ch]);
}

/** Context excerpt as HTML with <mark> around the highlight ranges. */
export function contextHtml(vm: ItemViewModel): string {
  let html = '';
  let cursor = 0;
  for (const h of vm.highlights) {
    html += escapeHtml(vm.context.slice(cursor, h.start));
    html += `<mark class="${h.kind}">${escapeHtml(vm.context.slice(h.start, h.end))}</mark>`;
    cursor = h.end;
  }
  html += escapeHtml(vm.context.slice(cursor));
  return html;
}
