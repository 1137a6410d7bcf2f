import { ServiceClient, StaleApprovalError } from './client';
import { ApprovalRequestPayload, SessionEvent } from './types';

export type DialogStatus = 'open' | 'submitting' | 'resolved' | 'stale';

/**
 * State machine behind the approval dialog.
 *
 * The full payload is shown in an editable buffer; nothing is posted
 * without an explicit approve/deny call (there is no auto-approve), and
 * the dialog only closes once the service acknowledges the decision.
 */
export class ApprovalDialog {
  status: DialogStatus = 'open';
  buffer: string;

  constructor(
    public readonly request: ApprovalRequestPayload,
    private client: ServiceClient,
  ) {
    this.buffer = request.payload;
  }

  get dangerFlags(): string[] {
    return this.request.danger;
  }

  get edited(): boolean {
    return this.buffer !== this.request.payload;
  }

  edit(text: string): void {
    if (this.status !== 'open') throw new Error(`dialog is ${this.status}`);
    this.buffer = text;
  }

  async approve(): Promise<void> {
    await this.post(
      this.edited
        ? { verdict: 'approve_edited' as const, edited_payload: this.buffer }
        : { verdict: 'approve' as const },
    );
  }

  async deny(reason = ''): Promise<void> {
    await this.post({ verdict: 'deny' as const, reason });
  }

  /** Called when an approval_resolved event for this request arrives. */
  notifyEvent(event: SessionEvent): void {
    if (
      event.kind === 'approval_resolved' &&
      event.payload['request_id'] === this.request.request_id &&
      this.status === 'open'
    ) {
      // someone else (the CLI, another tab) answered first
      this.status = 'stale';
    }
  }

  private async post(body: Parameters<ServiceClient['postApproval']>[1]) {
    if (this.status !== 'open') throw new Error(`dialog is ${this.status}`);
    this.status = 'submitting';
    try {
      await this.client.postApproval(this.request.request_id, body);
      this.status = 'resolved';
    } catch (err) {
      this.status = err instanceof StaleApprovalError ? 'stale' : 'open';
      if (!(err instanceof StaleApprovalError)) throw err;
    }
  }
}
