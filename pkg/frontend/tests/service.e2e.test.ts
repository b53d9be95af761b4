// Drives the real review service over HTTP: the UI's queue flow against a
// fixture run of three items, including reload-mid-queue and export.

import { type ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ReviewApi } from '../src/api.js';
import { ReviewQueue } from '../src/queue.js';

const PORT = 8600 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const response = await fetch(`${BASE}/runs`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error('review service did not come up');
}

beforeAll(async () => {
  const store = mkdtempSync(join(tmpdir(), 'review-e2e-'));
  service = spawn(
    'python3',
    ['-m', 'ontoforge.cli', 'review-serve', '--store', store, '--port', String(PORT)],
    { stdio: 'ignore' },
  );
  await waitForService();

  const body = {
    run_id: 'e2e',
    triples: [
      { subject: 'sand casting', object: 'sand mold', relation: 'uses', source_doc: 'd01', context: 'Sand casting uses a sand mold.' },
      { subject: 'injection speed', object: 'porosity', relation: 'causes', source_doc: 'd02', context: 'High injection speed causes porosity.' },
      { subject: 'cast iron', object: 'mechanical strength', relation: 'has property', source_doc: 'd04', context: 'Cast iron may lack mechanical strength.' },
    ],
  };
  const created = await fetch(`${BASE}/runs`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  expect(created.status).toBe(201);
}, 30_000);

afterAll(() => {
  service?.kill();
});

describe('review UI flow against the live service', () => {
  it('accept/reject/edit land as service-side statuses, reload preserves them', async () => {
    const api = new ReviewApi(BASE);
    const queue = new ReviewQueue(api, 'e2e', 'tester');
    await queue.load();
    expect(queue.phase).toBe('reviewing');
    expect(queue.current?.triple.subject).toBe('sand casting');

    await queue.decide('accept');
    await queue.decide('reject');

    // reload mid-queue: a fresh session sees both decisions and item 3 focused
    const reloaded = new ReviewQueue(api, 'e2e', 'tester');
    await reloaded.load();
    expect(reloaded.items.map((i) => i.status)).toEqual(['accepted', 'rejected', 'pending']);
    expect(reloaded.current?.triple.subject).toBe('cast iron');

    await reloaded.decide('edit', {
      subject: 'cast iron',
      object: 'mechanical strength',
      relation: 'lacks',
      source_doc: 'd04',
    });
    expect(reloaded.phase).toBe('done');
    expect(reloaded.stats?.decided).toBe(3);

    // the service, not the client, is the source of truth
    const items = await api.allItems('e2e');
    expect(items.map((i) => i.status)).toEqual(['accepted', 'rejected', 'edited']);
    expect(items[2].edited_triple?.relation).toBe('lacks');
    expect(items[2].reviewer).toBe('tester');

    // export returns exactly the accepted + edited triples
    const exported = await api.exportAccepted('e2e');
    expect(exported.triples).toHaveLength(2);
    expect(exported.triples.map((t) => t.relation).sort()).toEqual(['lacks', 'uses']);
  }, 30_000);

  it('double-deciding elsewhere surfaces as a conflict skip', async () => {
    const api = new ReviewApi(BASE);
    const body = {
      run_id: 'e2e-conflict',
      triples: [
        { subject: 'a', object: 'b', relation: 'r1', source_doc: 'd', context: 'a b' },
        { subject: 'c', object: 'd', relation: 'r2', source_doc: 'd', context: 'c d' },
      ],
    };
    await fetch(`${BASE}/runs`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });

    const mine = new ReviewQueue(api, 'e2e-conflict', 'me');
    await mine.load();
    // another reviewer decides the same item first
    await api.decide('e2e-conflict', 'item-0001', { action: 'reject', reviewer: 'other' });

    await mine.decide('accept');
    expect(mine.notice?.kind).toBe('conflict');
    expect(mine.current?.id).toBe('item-0002');
    const items = await api.allItems('e2e-conflict');
    expect(items[0].status).toBe('rejected'); // never overwritten
  }, 30_000);
});
