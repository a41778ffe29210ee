// Page wiring: scenario selector, explanation-variant switch, recommendation
// panel, and the accept / adjust / manual goal-submission flow. The page is
// stateless beyond the current selection; scenario order is already
// randomized server-side per session seed.

import { ApiClient, ApiError, submitGoal } from './api.js';
import { renderConnectionError, renderScenarioView } from './render.js';
import type { GoalSource, Recommendation, Scenario, Variant } from './types.js';

const api = new ApiClient('');

interface PageState {
  scenarios: Scenario[];
  current: Scenario | null;
  variant: Variant;
  recommendation: Recommendation | null;
}

const state: PageState = {
  scenarios: [],
  current: null,
  variant: 'value_plus_explanation',
  recommendation: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function refreshView(): Promise<void> {
  const scenario = state.current;
  if (!scenario) return;
  try {
    const [cycles, rec] = await Promise.all([
      api.getCycles(scenario.student_id),
      api.postRecommendation(scenario.student_id, scenario.goal_type, state.variant),
    ]);
    state.recommendation = rec;
    el('view').innerHTML = renderScenarioView(scenario, cycles, rec);
    el('banner').innerHTML = '';
    const adjust = el<HTMLInputElement>('adjust-value');
    if (rec.value !== null) adjust.value = String(rec.value);
  } catch (err) {
    el('banner').innerHTML = renderConnectionError(String(err));
  }
}

function showToast(text: string, isError = false): void {
  const toast = el('toast');
  toast.textContent = text;
  toast.className = isError ? 'toast toast-error' : 'toast';
  setTimeout(() => (toast.textContent = ''), 4000);
}

async function submit(value: number, source: GoalSource): Promise<void> {
  const scenario = state.current;
  if (!scenario) return;
  const error = el('inline-error');
  error.textContent = '';
  const view = el('view');
  const before = view.innerHTML;
  try {
    const cycle = await submitGoal(api, scenario.student_id, scenario.goal_type, value, source);
    showToast(`Stored goal of ${cycle.target_value} ${scenario.goal_type} (${source}).`);
    await refreshView(); // optimistic flows settle on server truth
  } catch (err) {
    view.innerHTML = before; // roll back any partial update
    if (err instanceof RangeError) {
      error.textContent = err.message;
    } else if (err instanceof ApiError) {
      error.textContent = `rejected (${err.status}): ${err.message}`;
    } else {
      el('banner').innerHTML = renderConnectionError(String(err));
    }
  }
}

async function init(): Promise<void> {
  try {
    state.scenarios = await api.getScenarios();
  } catch (err) {
    el('banner').innerHTML = renderConnectionError(String(err));
    return;
  }
  const selector = el<HTMLSelectElement>('scenario-select');
  selector.innerHTML = state.scenarios
    .map((s) => `<option value="${s.scenario_id}">${s.title}</option>`)
    .join('');
  selector.addEventListener('change', () => {
    state.current = state.scenarios.find((s) => s.scenario_id === selector.value) ?? null;
    void refreshView();
  });
  for (const variant of ['none', 'value_only', 'value_plus_explanation'] as Variant[]) {
    el<HTMLInputElement>(`variant-${variant}`).addEventListener('change', () => {
      state.variant = variant;
      void refreshView();
    });
  }
  el('accept-btn').addEventListener('click', () => {
    if (state.recommendation?.value != null) {
      void submit(state.recommendation.value, 'accepted');
    }
  });
  el('adjust-btn').addEventListener('click', () => {
    const raw = el<HTMLInputElement>('adjust-value').value;
    const value = Number(raw);
    const source: GoalSource =
      state.recommendation?.value != null && value !== state.recommendation.value
        ? 'adjusted'
        : 'manual';
    void submit(value, state.recommendation?.value != null ? source : 'manual');
  });
  state.current = state.scenarios[0] ?? null;
  await refreshView();
}

void init();
