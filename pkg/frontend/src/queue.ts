// Queue state for sequential triage. All truth comes from service responses:
// every decision stores the item the service returned, never a local guess,
// so a reload reconstructs exactly the same state.

import { ConflictError, ReviewApi } from './api.js';
import type { DecisionAction, ItemDto, RunStats, TripleDto } from './types.js';

export type Phase = 'loading' | 'reviewing' | 'done' | 'failed';

export interface Notice {
  kind: 'conflict' | 'network';
  message: string;
}

export class ReviewQueue {
  phase: Phase = 'loading';
  items: ItemDto[] = [];
  stats: RunStats | null = null;
  notice: Notice | null = null;
  /** Set while a decision POST failed and can be retried for the same item. */
  retry: { action: DecisionAction; edited?: TripleDto } | null = null;

  constructor(
    private readonly api: ReviewApi,
    readonly runId: string,
    readonly reviewer: string = 'expert',
  ) {}

  async load(): Promise<void> {
    this.phase = 'loading';
    try {
      this.items = await this.api.allItems(this.runId);
      this.stats = await this.api.stats(this.runId);
      this.phase = this.pending.length > 0 ? 'reviewing' : 'done';
    } catch (error) {
      this.phase = 'failed';
      this.notice = { kind: 'network', message: String(error) };
    }
  }

  get pending(): ItemDto[] {
    return this.items.filter((i) => i.status === 'pending');
  }

  /** The focused item: first pending in service order. */
  get current(): ItemDto | null {
    return this.pending[0] ?? null;
  }

  private replace(updated: ItemDto): void {
    this.items = this.items.map((i) => (i.id === updated.id ? updated : i));
  }

  private async refreshStats(): Promise<void> {
    try {
      this.stats = await this.api.stats(this.runId);
    } catch {
      // stats are advisory; the queue keeps working without them
    }
  }

  /**
   * Decide the focused item and advance. On conflict (decided elsewhere) the
   * item is refetched and skipped; on network failure the queue position is
   * preserved and the decision becomes retryable.
   */
  async decide(action: DecisionAction, edited?: TripleDto): Promise<void> {
    const item = this.current;
    if (!item) return;
    try {
      const updated = await this.api.decide(this.runId, item.id, {
        action,
        reviewer: this.reviewer,
        edited_triple: edited,
      });
      this.replace(updated);
      this.notice = null;
      this.retry = null;
    } catch (error) {
      if (error instanceof ConflictError) {
        const fresh = await this.api.getItem(this.runId, item.id).catch(() => undefined);
        if (fresh) this.replace(fresh);
        this.notice = {
          kind: 'conflict',
          message: `${item.id} was already decided elsewhere; skipped`,
        };
        this.retry = null;
      } else {
        this.notice = { kind: 'network', message: `decision failed: ${String(error)}` };
        this.retry = { action, edited };
        return; // keep the queue position
      }
    }
    await this.refreshStats();
    if (this.pending.length === 0) this.phase = 'done';
  }

  async retryLast(): Promise<void> {
    if (!this.retry) return;
    const { action, edited } = this.retry;
    await this.decide(action, edited);
  }
}
