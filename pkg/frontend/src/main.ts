// Browser entry point: mounts the three views and wires event delegation.
// The base URL comes from ?api=... or defaults to same-origin.

import { ApiClient } from './api';
import { startPolling } from './poll';
import { Store } from './store';
import { renderQueue } from './views/queue';
import { renderRules } from './views/rules';
import { renderTimeline } from './views/timeline';

type ViewName = 'queue' | 'timeline' | 'rules';

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('api');
  return (fromQuery ?? window.location.origin).replace(/\/$/, '');
}

export function mount(root: HTMLElement): void {
  const api = new ApiClient(baseUrl());
  const store = new Store(api);
  let view: ViewName = 'queue';

  function render(): void {
    const nav = `<nav>
      <button data-view="queue">Queue</button>
      <button data-view="timeline">Timeline</button>
      <button data-view="rules">Rules</button>
    </nav>`;
    let body = '';
    if (view === 'queue') {
      body = renderQueue(store.queue, store.rulebaseVersion, (n) => api.frameUrl(n));
    } else if (view === 'timeline') {
      body = renderTimeline(store.timeline, store.rulebaseVersion);
    } else {
      body = renderRules(store.rules, store.rulebaseVersion);
    }
    root.innerHTML = nav + body;
  }

  store.subscribe(render);

  root.addEventListener('click', (ev) => {
    const target = ev.target as HTMLElement;
    const viewName = target.dataset['view'] as ViewName | undefined;
    if (viewName) {
      view = viewName;
      if (view === 'rules') void store.refreshRules();
      render();
      return;
    }
    const action = target.dataset['action'];
    const card = target.closest<HTMLElement>('[data-item-id]');
    if (action && card) {
      const itemId = card.dataset['itemId']!;
      if (action === 'confirm' || action === 'reject') {
        const ruleText =
          card.querySelector<HTMLInputElement>('.rule-text')?.value || undefined;
        void store.decide(itemId, action, action === 'confirm' ? ruleText : undefined);
      } else if (action === 'retry') {
        void store.refreshQueue();
      }
    }
  });

  root.addEventListener('submit', (ev) => {
    const form = ev.target as HTMLFormElement;
    if (form.id !== 'add-rule') return;
    ev.preventDefault();
    const data = new FormData(form);
    void store.addRule(
      String(data.get('text') ?? ''),
      (data.get('kind') as 'anomaly' | 'normal') ?? 'anomaly',
    );
  });

  startPolling(() => store.refreshQueue());
  void store.refreshQueue();
  render();
}

if (typeof document !== 'undefined') {
  const root = document.getElementById('app');
  if (root) mount(root);
}
