import { StatusPayload } from './types';

export interface StatusBar {
  model: string;
  totalCost: string;
  runCost: string;
  runCount: number;
  maxRuns: number;
  elapsed: string;
  limitReached: boolean;
  raw: string;
}

export function zeroStatus(): StatusBar {
  return {
    model: '',
    totalCost: '$0.0000000000',
    runCost: '$0.0000000000',
    runCount: 0,
    maxRuns: 0,
    elapsed: '0s',
    limitReached: false,
    raw: '',
  };
}

// "provider/model | total: $T | run: $R | N / MAX | Ns / Ms"
const LINE = /^(\S+) \| total: (\$[\d.]+) \| run: (\$[\d.]+) \| (\d+) \/ (\d+) \| \S+ \/ (\S+)$/;

export function reduceStatus(payload: StatusPayload): StatusBar {
  const bar = zeroStatus();
  bar.raw = payload.line;
  bar.runCount = payload.run_count;
  bar.maxRuns = payload.max_runs;
  const m = LINE.exec(payload.line);
  if (m) {
    bar.model = m[1];
    bar.totalCost = m[2];
    bar.runCost = m[3];
    bar.elapsed = m[6];
  }
  bar.limitReached = bar.maxRuns > 0 && bar.runCount >= bar.maxRuns;
  return bar;
}
