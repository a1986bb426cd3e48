// Rule editor: current rulebase contents plus the add-rule form.

import { RulesState } from '../store';
import { esc, versionBadge } from './html';

export function renderRules(state: RulesState, rulebaseVersion: number): string {
  const rb = state.rulebase;
  if (!rb) {
    return `<section id="rules-view"><header><h2>Rules</h2>${versionBadge(rulebaseVersion)}</header>
  <p class="empty-state">Loading…</p></section>`;
  }
  const normal = rb.normal_rules
    .map((r) => `<li class="rule normal" data-source="${esc(r.source)}">${esc(r.text)}</li>`)
    .join('');
  const custom = rb.custom_anomaly_rules
    .map((r) => `<li class="rule custom">${esc(r.text)}</li>`)
    .join('');
  return `<section id="rules-view">
  <header><h2>Rules</h2>${versionBadge(rulebaseVersion)}</header>
  <div class="counts">
    ${rb.normal_rules.length} normal · ${rb.custom_anomaly_rules.length} custom
    · ${rb.perturbed_label_count} perturbed labels
  </div>
  <h3>Normal behavior</h3>
  <ul class="normal-rules">${normal}</ul>
  <h3>Custom anomaly rules</h3>
  <ul class="custom-rules">${custom || '<li class="empty-state">none yet</li>'}</ul>
  <form id="add-rule">
    <input name="text" type="text" placeholder="describe the rule">
    <select name="kind">
      <option value="anomaly" selected>anomaly</option>
      <option value="normal">normal</option>
    </select>
    <button type="submit">Add rule</button>
    ${state.formError ? `<div class="error" role="alert">${esc(state.formError)}</div>` : ''}
  </form>
</section>`;
}
