// Per-scene anomaly-score chart, rendered as inline SVG.
//
// Every plotted value is taken verbatim from the /api/timeline payload:
// the data-score attribute on each point carries the exact JSON number so
// the chart can be diffed against the API response.

import { TimelinePoint } from '../api';
import { TimelineState } from '../store';
import { esc, versionBadge } from './html';

export interface ChartGeometry {
  width: number;
  height: number;
  /** Scores at or above this line render as abnormal markers. */
  threshold: number;
}

export const DEFAULT_GEOMETRY: ChartGeometry = { width: 640, height: 200, threshold: 2.0 };

function scaleX(seq: number, minSeq: number, maxSeq: number, width: number): number {
  if (maxSeq === minSeq) return width / 2;
  return ((seq - minSeq) / (maxSeq - minSeq)) * (width - 20) + 10;
}

function scaleY(score: number, maxScore: number, height: number): number {
  const top = 10;
  const bottom = height - 10;
  if (maxScore === 0) return bottom;
  return bottom - (score / maxScore) * (bottom - top);
}

export function chartPoints(points: TimelinePoint[], geo: ChartGeometry) {
  const seqs = points.map((p) => p.seq);
  const minSeq = Math.min(...seqs);
  const maxSeq = Math.max(...seqs);
  const maxScore = Math.max(3.0, ...points.map((p) => p.anomaly_score));
  return points.map((p) => ({
    point: p,
    x: scaleX(p.seq, minSeq, maxSeq, geo.width),
    y: scaleY(p.anomaly_score, maxScore, geo.height),
    abnormal: p.final_label === 'abnormal',
  }));
}

export function renderTimeline(state: TimelineState, rulebaseVersion: number,
                               geo: ChartGeometry = DEFAULT_GEOMETRY): string {
  const header = `<header><h2>Timeline${state.scene ? ` — ${esc(state.scene)}` : ''}</h2>` +
    `${versionBadge(rulebaseVersion)}</header>`;
  if (state.points.length === 0) {
    const note = state.error ? `<p class="empty-state">${esc(state.error)}</p>` : '';
    return `<section id="timeline-view">${header}
  <svg class="chart" width="${geo.width}" height="${geo.height}"></svg>${note}
</section>`;
  }
  const placed = chartPoints(state.points, geo);
  const maxScore = Math.max(3.0, ...state.points.map((p) => p.anomaly_score));
  const thresholdY = scaleY(geo.threshold, maxScore, geo.height);
  const polyline = placed.map((c) => `${c.x.toFixed(1)},${c.y.toFixed(1)}`).join(' ');
  const markers = placed
    .map((c) => {
      const cls = c.abnormal ? 'point abnormal-marker' : 'point';
      return (
        `<circle class="${cls}" cx="${c.x.toFixed(1)}" cy="${c.y.toFixed(1)}" ` +
        `r="${c.abnormal ? 5 : 3}" data-frame-id="${esc(c.point.frame_id)}" ` +
        `data-seq="${c.point.seq}" data-score="${esc(JSON.stringify(c.point.anomaly_score))}"/>`
      );
    })
    .join('');
  return `<section id="timeline-view">${header}
  <svg class="chart" width="${geo.width}" height="${geo.height}" viewBox="0 0 ${geo.width} ${geo.height}">
    <rect class="threshold-band" x="0" y="0" width="${geo.width}" height="${thresholdY.toFixed(1)}"/>
    <polyline class="score-line" fill="none" points="${polyline}"/>
    ${markers}
  </svg>
</section>`;
}
