// UI state for the three views, mutated only through ApiClient calls.
//
// The store enforces the one-decision-per-item rule: while a decision is in
// flight its item id is latched and further submissions for it are dropped,
// so a double-click can never POST twice.

import {
  ApiClient,
  ApiError,
  Decision,
  PendingItem,
  RulebaseView,
  TimelinePoint,
} from './api';

export interface QueueState {
  items: PendingItem[];
  etag: string | null;
  /** Item ids with an unanswered POST; their buttons render disabled. */
  inFlight: Set<string>;
  /** Inline error per item id (conflicts, network failures). */
  errors: Map<string, string>;
}

export interface TimelineState {
  scene: string | null;
  points: TimelinePoint[];
  /** Exact payload the points were parsed from. */
  raw: string | null;
  error: string | null;
}

export interface RulesState {
  rulebase: RulebaseView | null;
  formError: string | null;
}

export type Listener = () => void;

export class Store {
  readonly queue: QueueState = {
    items: [],
    etag: null,
    inFlight: new Set(),
    errors: new Map(),
  };
  readonly timeline: TimelineState = { scene: null, points: [], raw: null, error: null };
  readonly rules: RulesState = { rulebase: null, formError: null };

  private listeners: Listener[] = [];

  constructor(readonly api: ApiClient) {}

  get rulebaseVersion(): number {
    return this.api.rulebaseVersion;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  async refreshQueue(): Promise<void> {
    const result = await this.api.pending(this.queue.etag);
    this.queue.etag = result.etag;
    if (result.changed) {
      this.queue.items = result.items;
      this.notify();
    }
  }

  /**
   * Submit one operator decision. Returns true when the POST was actually
   * sent (i.e. the item was not latched by an earlier in-flight request).
   */
  async decide(itemId: string, decision: Decision, ruleText?: string): Promise<boolean> {
    if (this.queue.inFlight.has(itemId)) return false;
    this.queue.inFlight.add(itemId);
    this.queue.errors.delete(itemId);
    this.notify();
    try {
      await this.api.decide(itemId, decision, ruleText);
      this.queue.items = this.queue.items.filter((i) => i.id !== itemId);
      this.queue.etag = null; // force a full refetch on the next poll
    } catch (e) {
      this.queue.errors.set(itemId, e instanceof ApiError ? e.code : 'network error');
    } finally {
      this.queue.inFlight.delete(itemId);
      this.notify();
    }
    return true;
  }

  async loadTimeline(scene: string, from?: number, to?: number): Promise<void> {
    this.timeline.scene = scene;
    try {
      const result = await this.api.timeline(scene, from, to);
      this.timeline.points = result.points;
      this.timeline.raw = result.raw;
      this.timeline.error = null;
    } catch (e) {
      // an unknown scene renders as an empty chart, not a broken view
      this.timeline.points = [];
      this.timeline.raw = null;
      this.timeline.error = e instanceof ApiError ? e.code : 'network error';
    }
    this.notify();
  }

  async refreshRules(): Promise<void> {
    this.rules.rulebase = await this.api.rulebase();
    this.notify();
  }

  async addRule(text: string, kind: 'anomaly' | 'normal' = 'anomaly'): Promise<boolean> {
    if (!text.trim()) {
      this.rules.formError = 'rule text must not be empty';
      this.notify();
      return false;
    }
    try {
      await this.api.addRule(text, kind, this.rules.rulebase?.version);
      this.rules.formError = null;
      await this.refreshRules();
      return true;
    } catch (e) {
      this.rules.formError = e instanceof ApiError ? e.code : 'network error';
      this.notify();
      return false;
    }
  }
}
