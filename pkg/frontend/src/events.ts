import { SessionEvent } from './types';

/**
 * Ordered event intake with seq-based deduplication.
 *
 * The service delivers at-least-once; reconnects replay from the last seen
 * seq, so overlapping batches are normal. The feed swallows duplicates and
 * rejects gaps (a gap means we must re-replay from the cursor).
 */
export class EventFeed {
  private cursor = 0;

  get lastSeq(): number {
    return this.cursor;
  }

  /** Accept a batch; returns only the genuinely new events, in order. */
  ingest(batch: SessionEvent[]): SessionEvent[] {
    const fresh: SessionEvent[] = [];
    for (const event of batch) {
      if (event.seq <= this.cursor) continue; // duplicate from replay overlap
      if (event.seq !== this.cursor + 1) {
        throw new EventGapError(this.cursor, event.seq);
      }
      this.cursor = event.seq;
      fresh.push(event);
    }
    return fresh;
  }

  reset(): void {
    this.cursor = 0;
  }
}

export class EventGapError extends Error {
  constructor(
    public readonly after: number,
    public readonly got: number,
  ) {
    super(`event gap: have seq ${after}, received ${got}`);
  }
}
