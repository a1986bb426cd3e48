// Typed client for the detection service HTTP API.
//
// Every piece of server state the UI shows comes through this module; there
// is no other channel. The client tracks the rulebase version from the
// X-Rulebase-Version header on every response so views can show a live
// version badge.

export interface RuleView {
  text: string;
  source: string;
  created_version: number;
}

export interface RulebaseView {
  version: number;
  normal_rules: RuleView[];
  custom_anomaly_rules: RuleView[];
  perturbed_label_count: number;
  params: Record<string, unknown>;
}

export interface EvidenceView {
  caption: string | null;
  stage1_score: number | null;
  stage2_score: number | null;
  anomaly_score: number;
  /** Optional top-k candidate evidence when the service includes it. */
  topk?: { text: string; sim: number; polarity: number }[];
}

export interface PendingItem {
  id: string;
  frame_id: string;
  kind: string;
  evidence: EvidenceView;
  status: string;
  created_at: number;
}

export interface TimelinePoint {
  frame_id: string;
  seq: number;
  anomaly_score: number;
  final_label: string;
  p: number;
}

export type Decision = 'confirm' | 'reject';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
  ) {
    super(`${status}: ${code}`);
  }
}

export interface PendingResult {
  items: PendingItem[];
  etag: string | null;
  /** null when the server answered 304 Not Modified. */
  changed: boolean;
}

export interface TimelineResult {
  points: TimelinePoint[];
  /** Exact response body, for byte-level comparison with what gets charted. */
  raw: string;
}

const VERSION_HEADER = 'X-Rulebase-Version';

export class ApiClient {
  /** Last rulebase version seen on any response; -1 before first contact. */
  rulebaseVersion = -1;

  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
  ) {}

  private headers(extra?: Record<string, string>): Record<string, string> {
    const h: Record<string, string> = { ...extra };
    if (this.token) h['Authorization'] = `Bearer ${this.token}`;
    return h;
  }

  private track(res: Response): void {
    const v = res.headers.get(VERSION_HEADER);
    if (v !== null) this.rulebaseVersion = Number(v);
  }

  private async fail(res: Response): Promise<never> {
    let code = res.statusText || 'error';
    try {
      const body = await res.json();
      if (body && typeof body.error === 'string') code = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, code);
  }

  async health(): Promise<{ status: string; rulebase_version: number }> {
    const res = await fetch(`${this.baseUrl}/api/health`, { headers: this.headers() });
    this.track(res);
    if (!res.ok) return this.fail(res);
    return res.json();
  }

  async rulebase(): Promise<RulebaseView> {
    const res = await fetch(`${this.baseUrl}/api/rulebase`, { headers: this.headers() });
    this.track(res);
    if (!res.ok) return this.fail(res);
    return res.json();
  }

  async addRule(text: string, kind: 'anomaly' | 'normal' = 'anomaly',
                expectedVersion?: number): Promise<number> {
    const res = await fetch(`${this.baseUrl}/api/rules`, {
      method: 'POST',
      headers: this.headers({ 'Content-Type': 'application/json' }),
      body: JSON.stringify({
        text,
        kind,
        ...(expectedVersion !== undefined ? { expected_version: expectedVersion } : {}),
      }),
    });
    this.track(res);
    if (!res.ok) return this.fail(res);
    const body = await res.json();
    return body.version as number;
  }

  /** ETag-aware fetch of the review queue; pass the previous etag to allow 304. */
  async pending(etag?: string | null): Promise<PendingResult> {
    const res = await fetch(`${this.baseUrl}/api/feedback/pending`, {
      headers: this.headers(etag ? { 'If-None-Match': etag } : undefined),
    });
    this.track(res);
    if (res.status === 304) {
      return { items: [], etag: res.headers.get('ETag'), changed: false };
    }
    if (!res.ok) return this.fail(res);
    const items = (await res.json()) as PendingItem[];
    return { items, etag: res.headers.get('ETag'), changed: true };
  }

  async decide(itemId: string, decision: Decision, ruleText?: string): Promise<number> {
    const res = await fetch(`${this.baseUrl}/api/feedback/${encodeURIComponent(itemId)}`, {
      method: 'POST',
      headers: this.headers({ 'Content-Type': 'application/json' }),
      body: JSON.stringify({
        decision,
        ...(ruleText ? { rule_text: ruleText } : {}),
      }),
    });
    this.track(res);
    if (!res.ok) return this.fail(res);
    const body = await res.json();
    return body.version as number;
  }

  async timeline(scene: string, from?: number, to?: number): Promise<TimelineResult> {
    const params = new URLSearchParams({ scene });
    if (from !== undefined) params.set('from', String(from));
    if (to !== undefined) params.set('to', String(to));
    const res = await fetch(`${this.baseUrl}/api/timeline?${params}`, {
      headers: this.headers(),
    });
    this.track(res);
    if (!res.ok) return this.fail(res);
    const raw = await res.text();
    return { points: JSON.parse(raw) as TimelinePoint[], raw };
  }

  async metrics(): Promise<Record<string, unknown>> {
    const res = await fetch(`${this.baseUrl}/api/metrics/latest`, {
      headers: this.headers(),
    });
    this.track(res);
    if (!res.ok) return this.fail(res);
    return res.json();
  }

  frameUrl(name: string): string {
    return `${this.baseUrl}/frames/${encodeURIComponent(name)}`;
  }
}
