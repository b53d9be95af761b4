// Thin typed client over the review service endpoints.

import type { DecisionBody, ItemDto, ItemPage, RunStats, RunSummary, TripleDto } from './types.js';

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(message: string) {
    super(message, 409);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  constructor(
    private readonly base: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      headers: { 'Content-Type': 'application/json' },
      ...init,
    });
    if (response.status === 409) {
      throw new ConflictError(await response.text());
    }
    if (!response.ok) {
      throw new ApiError(`${init?.method ?? 'GET'} ${path} failed: ${response.status}`, response.status);
    }
    return (await response.json()) as T;
  }

  listRuns(): Promise<{ runs: RunSummary[] }> {
    return this.request('/runs');
  }

  async allItems(runId: string): Promise<ItemDto[]> {
    const pageSize = 200;
    const items: ItemDto[] = [];
    for (let page = 1; ; page += 1) {
      const body = await this.request<ItemPage>(
        `/runs/${runId}/items?page=${page}&page_size=${pageSize}`,
      );
      items.push(...body.items);
      if (items.length >= body.total || body.items.length === 0) return items;
    }
  }

  getItem(runId: string, itemId: string): Promise<ItemDto | undefined> {
    // the service pages items; refetching all is fine at review scale
    return this.allItems(runId).then((items) => items.find((i) => i.id === itemId));
  }

  decide(runId: string, itemId: string, body: DecisionBody): Promise<ItemDto> {
    return this.request(`/runs/${runId}/items/${itemId}/decision`, {
      method: 'POST',
      body: JSON.stringify(body),
    });
  }

  stats(runId: string): Promise<RunStats> {
    return this.request(`/runs/${runId}/stats`);
  }

  exportAccepted(runId: string): Promise<{ triples: TripleDto[] }> {
    return this.request(`/runs/${runId}/export?status=accepted`);
  }

  exportUrl(runId: string): string {
    return `${this.base}/runs/${runId}/export?status=accepted`;
  }
}
