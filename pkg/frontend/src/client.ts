import { ApprovalBody, EventsPage } from './types';

export interface ServiceClient {
  getEvents(fromSeq: number): Promise<EventsPage>;
  postApproval(requestId: string, body: ApprovalBody): Promise<void>;
  postQuery(mode: 'direct' | 'auto', text: string): Promise<void>;
}

/** Thin fetch wrapper around the session service HTTP surface. */
export class HttpServiceClient implements ServiceClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: typeof fetch = fetch,
  ) {}

  async getEvents(fromSeq: number): Promise<EventsPage> {
    const res = await this.fetchFn(`${this.baseUrl}/events?from_seq=${fromSeq}`);
    if (res.status === 410) {
      // retention window passed us by; restart from the beginning
      return this.getEvents(0);
    }
    if (!res.ok) throw new Error(`events fetch failed: ${res.status}`);
    return (await res.json()) as EventsPage;
  }

  async postApproval(requestId: string, body: ApprovalBody): Promise<void> {
    const res = await this.fetchFn(`${this.baseUrl}/approvals/${requestId}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (res.status === 404) throw new StaleApprovalError(requestId);
    if (!res.ok) throw new Error(`approval post failed: ${res.status}`);
  }

  async postQuery(mode: 'direct' | 'auto', text: string): Promise<void> {
    const res = await this.fetchFn(`${this.baseUrl}/query`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ mode, text }),
    });
    if (!res.ok) throw new Error(`query rejected: ${res.status}`);
  }
}

export class StaleApprovalError extends Error {
  constructor(requestId: string) {
    super(`approval ${requestId} is no longer pending`);
  }
}
