import { afterEach, beforeEach, describe, expect, it } from 'vitest';

import { ApiClient, TimelinePoint } from '../src/api';
import { Store } from '../src/store';
import { chartPoints, renderTimeline } from '../src/views/timeline';
import { MockService } from './mockServer';

function fixturePoints(): TimelinePoint[] {
  const points: TimelinePoint[] = [];
  for (let seq = 0; seq < 20; seq++) {
    const abnormal = seq === 4 || seq === 11 || seq === 17;
    points.push({
      frame_id: `f${String(seq).padStart(4, '0')}`,
      seq,
      anomaly_score: abnormal ? 2.71828 + seq / 100 : 1.2689,
      final_label: abnormal ? 'abnormal' : 'normal',
      p: 0.0123,
    });
  }
  return points;
}

describe('timeline view', () => {
  let service: MockService;
  let store: Store;

  beforeEach(async () => {
    service = new MockService([], new Map([['s0', fixturePoints()]]));
    const baseUrl = await service.start();
    store = new Store(new ApiClient(baseUrl));
  });

  afterEach(async () => {
    await service.stop();
  });

  it('plots all 20 fixture points in seq order', async () => {
    await store.loadTimeline('s0');
    expect(store.timeline.points.length).toBe(20);
    expect(store.timeline.points.map((p) => p.seq)).toEqual(
      [...Array(20).keys()],
    );
    const html = renderTimeline(store.timeline, store.rulebaseVersion);
    const circles = html.match(/<circle /g) ?? [];
    expect(circles.length).toBe(20);
  });

  it('marks exactly the abnormal frames', async () => {
    await store.loadTimeline('s0');
    const html = renderTimeline(store.timeline, store.rulebaseVersion);
    const markers = html.match(/abnormal-marker/g) ?? [];
    expect(markers.length).toBe(3);
    expect(html).toContain('threshold-band');
  });

  it('chart values byte-match the /api/timeline payload', async () => {
    await store.loadTimeline('s0');
    // what the chart plots, re-serialized, must equal the exact bytes the
    // service sent -- no rounding or re-interpretation on the way in
    expect(JSON.stringify(store.timeline.points)).toBe(store.timeline.raw);
    // and each rendered marker carries the exact score serialization
    const html = renderTimeline(store.timeline, store.rulebaseVersion);
    for (const p of store.timeline.points) {
      expect(html).toContain(`data-score="${JSON.stringify(p.anomaly_score)}"`);
    }
  });

  it('windows with from/to', async () => {
    await store.loadTimeline('s0', 5, 10);
    expect(store.timeline.points.map((p) => p.seq)).toEqual([5, 6, 7, 8, 9]);
  });

  it('renders an unknown scene as an empty chart', async () => {
    await store.loadTimeline('mars');
    expect(store.timeline.points).toEqual([]);
    expect(store.timeline.error).toBe('UnknownScene');
    const html = renderTimeline(store.timeline, store.rulebaseVersion);
    expect(html).toContain('<svg');
    expect(html).not.toContain('<circle');
  });

  it('keeps x positions monotone in seq', async () => {
    await store.loadTimeline('s0');
    const placed = chartPoints(store.timeline.points, {
      width: 640,
      height: 200,
      threshold: 2,
    });
    for (let i = 1; i < placed.length; i++) {
      expect(placed[i]!.x).toBeGreaterThan(placed[i - 1]!.x);
    }
  });
});
