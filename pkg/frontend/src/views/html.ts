// Minimal string templating: views are pure functions from state to markup.

export function esc(value: unknown): string {
  return String(value)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function versionBadge(version: number): string {
  const label = version >= 0 ? `v${version}` : '–';
  return `<span class="version-badge" data-version="${esc(version)}">rulebase ${esc(label)}</span>`;
}
