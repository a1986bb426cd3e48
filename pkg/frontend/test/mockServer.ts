// In-process stand-in for the detection service, implementing the HTTP
// contract the UI depends on: rulebase versioning, the ETag'd feedback
// queue, decision conflicts, and timeline windows.

import { createHash } from 'node:crypto';
import { createServer, IncomingMessage, Server, ServerResponse } from 'node:http';
import { AddressInfo } from 'node:net';

import { PendingItem, TimelinePoint } from '../src/api';

export interface MockState {
  version: number;
  pending: PendingItem[];
  decided: Map<string, string>; // item id -> decision
  customRules: string[];
  timelines: Map<string, TimelinePoint[]>;
  requests: { method: string; path: string }[];
  /** Artificial delay before answering POST /api/feedback/*, in ms. */
  decideDelayMs: number;
}

export function seedItem(n: number): PendingItem {
  return {
    id: `uil:f${String(n).padStart(4, '0')}`,
    frame_id: `f${String(n).padStart(4, '0')}`,
    kind: 'uil_pending',
    evidence: {
      caption: `subject ${n} crossing the restricted area`,
      stage1_score: -0.8,
      stage2_score: -1.0,
      anomaly_score: 2.7,
    },
    status: 'pending',
    created_at: 1000 + n,
  };
}

function normalize(text: string): string {
  return text.trim().toLowerCase().replace(/\s+/g, ' ');
}

function readBody(req: IncomingMessage): Promise<string> {
  return new Promise((resolve) => {
    let data = '';
    req.on('data', (chunk) => (data += chunk));
    req.on('end', () => resolve(data));
  });
}

function etagOf(items: PendingItem[]): string {
  const digest = createHash('sha256').update(JSON.stringify(items)).digest('hex');
  return `"${digest.slice(0, 16)}"`;
}

export class MockService {
  readonly state: MockState;
  private server: Server | null = null;
  baseUrl = '';

  constructor(pending: PendingItem[] = [], timelines: Map<string, TimelinePoint[]> = new Map()) {
    this.state = {
      version: 3,
      pending,
      decided: new Map(),
      customRules: [],
      timelines,
      requests: [],
      decideDelayMs: 0,
    };
  }

  async start(): Promise<string> {
    this.server = createServer((req, res) => void this.handle(req, res));
    await new Promise<void>((resolve) => this.server!.listen(0, '127.0.0.1', resolve));
    const addr = this.server.address() as AddressInfo;
    this.baseUrl = `http://127.0.0.1:${addr.port}`;
    return this.baseUrl;
  }

  async stop(): Promise<void> {
    if (this.server) await new Promise<void>((resolve) => this.server!.close(() => resolve()));
  }

  private json(res: ServerResponse, status: number, body: unknown,
               headers: Record<string, string> = {}): void {
    const payload = JSON.stringify(body);
    res.writeHead(status, {
      'Content-Type': 'application/json',
      'X-Rulebase-Version': String(this.state.version),
      ...headers,
    });
    res.end(payload);
  }

  private async handle(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const url = new URL(req.url ?? '/', this.baseUrl);
    const path = url.pathname;
    this.state.requests.push({ method: req.method ?? 'GET', path: decodeURIComponent(path) });

    if (req.method === 'GET' && path === '/api/health') {
      return this.json(res, 200, { status: 'ok', rulebase_version: this.state.version });
    }

    if (req.method === 'GET' && path === '/api/feedback/pending') {
      const items = this.state.pending.filter((i) => !this.state.decided.has(i.id));
      const etag = etagOf(items);
      if (req.headers['if-none-match'] === etag) {
        res.writeHead(304, { ETag: etag, 'X-Rulebase-Version': String(this.state.version) });
        return res.end();
      }
      return this.json(res, 200, items, { ETag: etag });
    }

    if (req.method === 'POST' && path.startsWith('/api/feedback/')) {
      if (this.state.decideDelayMs > 0) {
        await new Promise((r) => setTimeout(r, this.state.decideDelayMs));
      }
      const itemId = decodeURIComponent(path.slice('/api/feedback/'.length));
      const body = JSON.parse(await readBody(req));
      const item = this.state.pending.find((i) => i.id === itemId);
      if (!item) return this.json(res, 404, { error: 'UnknownItem' });
      if (this.state.decided.has(itemId)) return this.json(res, 409, { error: 'AlreadyDecided' });
      if (body.decision !== 'confirm' && body.decision !== 'reject') {
        return this.json(res, 422, { error: `unknown decision: ${body.decision}` });
      }
      this.state.decided.set(itemId, body.decision);
      if (body.decision === 'confirm' && body.rule_text) {
        this.state.customRules.push(body.rule_text);
        this.state.version += 1;
      }
      return this.json(res, 200, { version: this.state.version });
    }

    if (req.method === 'GET' && path === '/api/rulebase') {
      return this.json(res, 200, {
        version: this.state.version,
        normal_rules: [
          { text: 'people walk along the path', source: 'induced', created_version: 1 },
        ],
        custom_anomaly_rules: this.state.customRules.map((text) => ({
          text,
          source: 'custom',
          created_version: this.state.version,
        })),
        perturbed_label_count: 339,
        params: { k: 5, tau1: 0, tau2: 0 },
      });
    }

    if (req.method === 'POST' && path === '/api/rules') {
      const body = JSON.parse(await readBody(req));
      const text = String(body.text ?? '');
      if (!text.trim()) return this.json(res, 422, { error: 'empty rule text' });
      if (body.expected_version !== undefined && body.expected_version !== this.state.version) {
        return this.json(res, 409, { error: 'stale version', current_version: this.state.version });
      }
      if (this.state.customRules.some((r) => normalize(r) === normalize(text))) {
        return this.json(res, 409, { error: 'DuplicateRule' });
      }
      this.state.customRules.push(text);
      this.state.version += 1;
      return this.json(res, 200, { version: this.state.version });
    }

    if (req.method === 'GET' && path === '/api/timeline') {
      const scene = url.searchParams.get('scene') ?? '';
      const points = this.state.timelines.get(scene);
      if (!points) return this.json(res, 404, { error: 'UnknownScene' });
      const from = Number(url.searchParams.get('from') ?? 0);
      const toParam = url.searchParams.get('to');
      const to = toParam === null ? Infinity : Number(toParam);
      const window = points
        .filter((p) => p.seq >= from && p.seq < to)
        .sort((a, b) => a.seq - b.seq);
      return this.json(res, 200, window);
    }

    this.json(res, 404, { error: 'not found' });
  }
}
