// Review queue: pending anomalies awaiting an operator decision.

import { PendingItem } from '../api';
import { QueueState } from '../store';
import { esc, versionBadge } from './html';

function evidenceRows(item: PendingItem, k: number): string {
  const topk = (item.evidence.topk ?? []).slice(0, k);
  if (topk.length === 0) return '';
  const rows = topk
    .map(
      (e) =>
        `<tr><td>${esc(e.text)}</td><td>${esc(e.sim.toFixed(3))}</td>` +
        `<td>${e.polarity > 0 ? '+' : '−'}</td></tr>`,
    )
    .join('');
  return `<table class="evidence">${rows}</table>`;
}

function itemCard(item: PendingItem, state: QueueState, frameUrl: (n: string) => string,
                  k: number): string {
  const busy = state.inFlight.has(item.id);
  const error = state.errors.get(item.id);
  const disabled = busy ? ' disabled' : '';
  return `
<li class="pending-item" data-item-id="${esc(item.id)}">
  <img class="thumb" src="${esc(frameUrl(item.frame_id + '.png'))}" alt="${esc(item.frame_id)}">
  <div class="caption">${esc(item.evidence.caption ?? '(no caption)')}</div>
  <div class="scores">
    stage 1: ${esc(item.evidence.stage1_score ?? 'n/a')}
    · stage 2: ${esc(item.evidence.stage2_score ?? 'n/a')}
    · anomaly: ${esc(item.evidence.anomaly_score.toFixed(3))}
  </div>
  ${evidenceRows(item, k)}
  <input class="rule-text" type="text" placeholder="optional anomaly rule"${disabled}>
  <button class="confirm" data-action="confirm"${disabled}>Confirm</button>
  <button class="reject" data-action="reject"${disabled}>Reject</button>
  ${error ? `<div class="error" role="alert">${esc(error)} <button data-action="retry">retry</button></div>` : ''}
</li>`;
}

export function renderQueue(state: QueueState, rulebaseVersion: number,
                            frameUrl: (n: string) => string, k = 5): string {
  const body =
    state.items.length === 0
      ? '<p class="empty-state">No pending anomalies — the queue is clear.</p>'
      : `<ul class="queue">${state.items
          .map((i) => itemCard(i, state, frameUrl, k))
          .join('')}</ul>`;
  return `<section id="queue-view">
  <header><h2>Review queue</h2>${versionBadge(rulebaseVersion)}</header>
  ${body}
</section>`;
}
