// Pure view builders: scenario payloads in, HTML strings out. Every number
// shown on screen comes straight off a service response field, so the
// snapshot tests can diff views against recorded API fixtures.

import type { GoalCycle, GoalType, Recommendation, Scenario } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function unitLabel(goalType: GoalType): string {
  return goalType === 'minutes' ? 'minutes' : 'skills';
}

export function formatValue(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(1);
}

export function percentLabel(achieved: number, target: number): string {
  return `${Math.round((achieved / target) * 100)}%`;
}

export function renderProgressBar(cycle: GoalCycle): string {
  const unit = unitLabel(cycle.goal_type);
  const pct = percentLabel(cycle.achieved_value, cycle.target_value);
  const fill = Math.min(100, (cycle.achieved_value / cycle.target_value) * 100);
  return [
    '<div class="progress-block">',
    `  <div class="progress-bar"><div class="progress-fill" style="width:${fill.toFixed(1)}%"></div>`,
    `    <span class="progress-label">${pct}</span></div>`,
    `  <div class="progress-caption">Achieved: ${formatValue(cycle.achieved_value)} ${unit}</div>`,
    `  <div class="progress-caption">Target: ${formatValue(cycle.target_value)} ${unit}</div>`,
    '</div>',
  ].join('\n');
}

export function renderCyclesChart(cycles: GoalCycle[]): string {
  if (cycles.length === 0) {
    return '<div class="cycles-chart cycles-empty">No goal cycles yet.</div>';
  }
  const top = Math.max(...cycles.map((c) => Math.max(c.target_value, c.achieved_value)));
  const bars = cycles
    .map((cycle) => {
      const targetH = top > 0 ? (cycle.target_value / top) * 100 : 0;
      const achievedH = top > 0 ? (cycle.achieved_value / top) * 100 : 0;
      return [
        `  <div class="cycle-group" title="cycle ${cycle.cycle_index}">`,
        `    <div class="bar bar-target" style="height:${targetH.toFixed(1)}%"></div>`,
        `    <div class="bar bar-achieved" style="height:${achievedH.toFixed(1)}%"></div>`,
        `    <div class="cycle-caption">#${cycle.cycle_index}<br>` +
          `${formatValue(cycle.achieved_value)}/${formatValue(cycle.target_value)}</div>`,
        '  </div>',
      ].join('\n');
    })
    .join('\n');
  return [
    '<div class="cycles-chart">',
    bars,
    '  <div class="legend"><span class="swatch swatch-target"></span>target' +
      '<span class="swatch swatch-achieved"></span>achieved</div>',
    '</div>',
  ].join('\n');
}

export function renderRecommendationPanel(rec: Recommendation): string {
  if (rec.variant === 'none' || rec.value === null) {
    return '';
  }
  const unit = unitLabel(rec.goal_type);
  const direction = rec.direction ?? 'hold';
  const verb = direction === 'raise' ? 'Raise' : direction === 'lower' ? 'Lower' : 'Keep';
  const lines = [
    `<div class="rec-box rec-${direction}">`,
    `  <div class="rec-headline">Recommendation: ${verb} goal to ` +
      `${formatValue(rec.value)} ${unit}</div>`,
  ];
  if (rec.variant === 'value_plus_explanation' && rec.explanation) {
    lines.push(`  <p class="rec-explanation">${escapeHtml(rec.explanation)}</p>`);
    if (rec.cited_features.length > 0) {
      const cited = rec.cited_features
        .map((f) => `<li>${escapeHtml(f.feature_name)}: ${f.value.toFixed(2)}</li>`)
        .join('');
      lines.push(`  <ul class="rec-features">${cited}</ul>`);
    }
  }
  lines.push('</div>');
  return lines.join('\n');
}

export function renderScenarioView(
  scenario: Scenario,
  cycles: GoalCycle[],
  rec: Recommendation,
): string {
  const completed = cycles.filter((c) => c.completed);
  const last = completed[completed.length - 1];
  return [
    `<section class="scenario" data-scenario="${escapeHtml(scenario.scenario_id)}">`,
    `  <h2>${escapeHtml(scenario.title)}</h2>`,
    last ? renderProgressBar(last) : '<div class="progress-block">No completed cycle.</div>',
    renderCyclesChart(cycles),
    renderRecommendationPanel(rec),
    '</section>',
  ].join('\n');
}

export function renderConnectionError(detail: string): string {
  return `<div class="banner banner-error">Service unreachable: ${escapeHtml(detail)}</div>`;
}
