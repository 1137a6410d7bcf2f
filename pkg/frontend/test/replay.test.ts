import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { EventFeed, EventGapError } from '../src/events';
import { reduceStatus, zeroStatus } from '../src/statusbar';
import { applyEvent, initialState, reduceAll } from '../src/transcript';
import { SessionEvent } from '../src/types';

const recorded: SessionEvent[] = JSON.parse(
  readFileSync(join(__dirname, 'fixtures', 'session-50.json'), 'utf-8'),
);

describe('replay determinism', () => {
  it('covers a 50 event recorded session', () => {
    expect(recorded).toHaveLength(50);
    expect(recorded[0].seq).toBe(1);
  });

  it('rebuilds identical state from two full replays', () => {
    const first = reduceAll(recorded);
    const second = reduceAll(recorded);
    expect(second).toEqual(first);
  });

  it('page reload mid-run matches the live session', () => {
    // live tab: events arrive one at a time
    const live = initialState();
    for (const event of recorded) applyEvent(live, event);

    // reloaded tab: full replay from seq 0
    expect(reduceAll(recorded)).toEqual(live);
  });

  it('resume with overlapping batches produces no duplicate bubbles', () => {
    const feed = new EventFeed();
    const state = initialState();
    for (const event of feed.ingest(recorded.slice(0, 30))) {
      applyEvent(state, event);
    }
    // reconnect replays from an earlier seq; overlap must be swallowed
    for (const event of feed.ingest(recorded.slice(20))) {
      applyEvent(state, event);
    }
    expect(state).toEqual(reduceAll(recorded));
  });

  it('matches the transcript snapshot', () => {
    const state = reduceAll(recorded);
    expect({
      bubbles: state.bubbles,
      status: state.status,
      phase: state.phase,
    }).toMatchSnapshot();
  });

  it('links tool results under their calls', () => {
    const state = reduceAll(recorded);
    const calls = state.bubbles.flatMap((b) => b.toolCalls);
    expect(calls.length).toBeGreaterThan(0);
    for (const call of calls) {
      expect(call.result).toBeDefined();
    }
  });

  it('shows the denial as a tool result', () => {
    const state = reduceAll(recorded);
    const results = state.bubbles
      .flatMap((b) => b.toolCalls)
      .map((c) => c.result ?? '');
    expect(results.some((r) => r.includes('user denied execution'))).toBe(true);
  });

  it('leaves no pending approvals after a finished session', () => {
    expect(reduceAll(recorded).pending).toEqual([]);
  });
});

describe('event feed', () => {
  it('rejects gaps', () => {
    const feed = new EventFeed();
    feed.ingest(recorded.slice(0, 5));
    expect(() => feed.ingest(recorded.slice(7))).toThrow(EventGapError);
  });

  it('tracks the last seen seq across batches', () => {
    const feed = new EventFeed();
    feed.ingest(recorded.slice(0, 10));
    feed.ingest(recorded.slice(5, 12));
    expect(feed.lastSeq).toBe(12);
  });
});

describe('status bar', () => {
  it('parses the documented cost line', () => {
    const bar = reduceStatus({
      line:
        'anthropic/claude-3-7-sonnet-20250219 | total: $0.0153540000 | ' +
        'run: $0.0153540000 | 1 / 100 | 7s / 7s',
      run_count: 1,
      max_runs: 100,
    });
    expect(bar.model).toBe('anthropic/claude-3-7-sonnet-20250219');
    expect(bar.totalCost).toBe('$0.0153540000');
    expect(bar.runCost).toBe('$0.0153540000');
    expect(bar.elapsed).toBe('7s');
    expect(bar.limitReached).toBe(false);
  });

  it('starts at zeros', () => {
    const bar = zeroStatus();
    expect(bar.totalCost).toBe('$0.0000000000');
    expect(bar.runCount).toBe(0);
  });

  it('flags the interaction limit at 15 of 15', () => {
    const bar = reduceStatus({
      line: 'x/y | total: $0.1 | run: $0.1 | 15 / 15 | 1s / 30s',
      run_count: 15,
      max_runs: 15,
    });
    expect(bar.limitReached).toBe(true);
  });
});
