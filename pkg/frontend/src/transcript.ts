import {
  ApprovalRequestPayload,
  SessionEvent,
  StatusPayload,
  WireMessage,
} from './types';
import { StatusBar, reduceStatus, zeroStatus } from './statusbar';

export interface ToolCallView {
  callId: string;
  tool: string;
  payload: string;
  result?: string;
}

export interface Bubble {
  role: string;
  text: string;
  toolCalls: ToolCallView[];
}

export interface ConsoleState {
  bubbles: Bubble[];
  pending: ApprovalRequestPayload[];
  status: StatusBar;
  phase: 'idle' | 'running' | 'done' | 'aborted' | 'error';
  finalAnswer: string | null;
  errors: string[];
}

export function initialState(): ConsoleState {
  return {
    bubbles: [],
    pending: [],
    status: zeroStatus(),
    phase: 'idle',
    finalAnswer: null,
    errors: [],
  };
}

function bubbleFromMessage(msg: WireMessage): Bubble {
  const toolCalls: ToolCallView[] = [];
  const texts: string[] = [];
  for (const block of msg.blocks) {
    if (block.kind === 'tool_use') {
      toolCalls.push({
        callId: block.tool_call_id ?? '',
        tool: block.tool_name ?? '',
        payload: JSON.stringify(block.tool_args ?? {}),
      });
    } else if (block.text) {
      texts.push(block.text);
    }
  }
  return { role: msg.role, text: texts.join('\n'), toolCalls };
}

function attachToolResult(state: ConsoleState, msg: WireMessage): boolean {
  // tool results render collapsed under the call that produced them
  const block = msg.blocks.find((b) => b.kind === 'tool_result');
  if (!block || !block.tool_call_id) return false;
  for (let i = state.bubbles.length - 1; i >= 0; i--) {
    const call = state.bubbles[i].toolCalls.find(
      (c) => c.callId === block.tool_call_id,
    );
    if (call) {
      call.result = block.text ?? '';
      return true;
    }
  }
  return false;
}

/**
 * Fold one service event into the console state (mutating reducer).
 *
 * The console holds no state of its own: replaying the same events from
 * seq 0 reconstructs exactly this object.
 */
export function applyEvent(state: ConsoleState, event: SessionEvent): ConsoleState {
  switch (event.kind) {
    case 'message_appended': {
      const msg = event.payload as unknown as WireMessage;
      if (msg.role === 'tool_result' && attachToolResult(state, msg)) break;
      state.bubbles.push(bubbleFromMessage(msg));
      break;
    }
    case 'approval_requested':
      state.pending.push(event.payload as unknown as ApprovalRequestPayload);
      state.phase = 'running';
      break;
    case 'approval_resolved': {
      const id = event.payload['request_id'] as string;
      state.pending = state.pending.filter((p) => p.request_id !== id);
      break;
    }
    case 'tool_executed':
      // the output also arrives as a message_appended tool_result; nothing
      // extra to render here, but the run is clearly still live
      state.phase = 'running';
      break;
    case 'status_updated':
      state.status = reduceStatus(event.payload as unknown as StatusPayload);
      break;
    case 'run_finished':
      state.phase = (event.payload['phase'] as ConsoleState['phase']) ?? 'done';
      state.finalAnswer = (event.payload['final_answer'] as string) ?? null;
      if (state.phase === 'aborted') state.status.limitReached = true;
      break;
    case 'error':
      state.phase = 'error';
      state.errors.push(String(event.payload['message'] ?? 'unknown error'));
      break;
  }
  return state;
}

/** Rebuild console state from a full replay, e.g. after a page reload. */
export function reduceAll(events: SessionEvent[]): ConsoleState {
  const state = initialState();
  for (const event of events) applyEvent(state, event);
  return state;
}
