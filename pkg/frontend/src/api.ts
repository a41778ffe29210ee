// Thin JSON client for the service API. The fetch implementation is
// injectable so tests can run without a server.

import type { GoalCycle, GoalSource, GoalType, Recommendation, Scenario, Variant } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      const body = await response.text();
      throw new ApiError(response.status, body || response.statusText);
    }
    return (await response.json()) as T;
  }

  getScenarios(): Promise<Scenario[]> {
    return this.request<Scenario[]>('/scenarios');
  }

  getCycles(studentId: string): Promise<GoalCycle[]> {
    return this.request<GoalCycle[]>(`/students/${encodeURIComponent(studentId)}/cycles`);
  }

  postRecommendation(studentId: string, goalType: GoalType, variant: Variant): Promise<Recommendation> {
    return this.request<Recommendation>('/recommendation', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ student_id: studentId, goal_type: goalType, variant }),
    });
  }

  postGoal(studentId: string, goalType: GoalType, value: number, source: GoalSource): Promise<GoalCycle> {
    return this.request<GoalCycle>('/goals', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ student_id: studentId, goal_type: goalType, value, source }),
    });
  }
}

/** Client-side validation plus submit; never issues a request for a bad value. */
export async function submitGoal(
  api: ApiClient,
  studentId: string,
  goalType: GoalType,
  value: number,
  source: GoalSource,
): Promise<GoalCycle> {
  if (!Number.isFinite(value) || value <= 0) {
    throw new RangeError('goal value must be a positive number');
  }
  return api.postGoal(studentId, goalType, value, source);
}
