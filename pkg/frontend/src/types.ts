// Wire types for the session service. These mirror the service's endpoint
// table and event schema; the console consumes nothing else.

export type EventKind =
  | 'message_appended'
  | 'approval_requested'
  | 'approval_resolved'
  | 'tool_executed'
  | 'status_updated'
  | 'run_finished'
  | 'error';

export interface SessionEvent {
  seq: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface ContentBlock {
  kind: 'text' | 'tool_use' | 'tool_result';
  text?: string;
  tool_call_id?: string;
  tool_name?: string;
  tool_args?: Record<string, unknown>;
}

export interface WireMessage {
  role: 'system' | 'user' | 'assistant' | 'tool_result';
  origin: string;
  timestamp: number;
  blocks: ContentBlock[];
}

export interface ApprovalRequestPayload {
  request_id: string;
  tool: string;
  payload: string;
  danger: string[];
}

export interface StatusPayload {
  line: string;
  run_count: number;
  max_runs: number;
}

export type Verdict = 'approve' | 'approve_edited' | 'deny';

export interface ApprovalBody {
  verdict: Verdict;
  edited_payload?: string;
  reason?: string;
}

export interface EventsPage {
  events: SessionEvent[];
  next_seq: number;
}
