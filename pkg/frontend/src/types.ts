// Wire types: exactly what the review service emits.

export interface TripleDto {
  subject: string;
  object: string;
  relation: string;
  source_doc: string;
}

export type ItemStatus = 'pending' | 'accepted' | 'rejected' | 'edited';

export interface ItemDto {
  id: string;
  triple: TripleDto;
  context_excerpt: string;
  status: ItemStatus;
  edited_triple: TripleDto | null;
  reviewer: string;
  decided_at: string;
}

export interface ItemPage {
  items: ItemDto[];
  page: number;
  page_size: number;
  total: number;
}

export interface RunStats {
  pending: number;
  accepted: number;
  rejected: number;
  edited: number;
  total: number;
  decided: number;
  acceptance_rate: number | null;
}

export interface RunSummary extends RunStats {
  run_id: string;
}

export type DecisionAction = 'accept' | 'reject' | 'edit';

export interface DecisionBody {
  action: DecisionAction;
  reviewer: string;
  edited_triple?: TripleDto;
}
