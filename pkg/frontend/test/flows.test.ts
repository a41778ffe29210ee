// Goal-submission flow against a stubbed transport: accept and adjust
// persist through POST /goals; invalid values never reach the wire.

import { readFileSync } from 'node:fs';
import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError, submitGoal } from '../src/api.js';
import type { GoalCycle } from '../src/types.js';

const storedCycle = JSON.parse(
  readFileSync(new URL('../fixtures/goal_post_response.json', import.meta.url), 'utf-8'),
) as GoalCycle;

interface Call {
  url: string;
  init?: RequestInit;
}

function stubClient(status = 200, body: unknown = storedCycle) {
  const calls: Call[] = [];
  const client = new ApiClient('', async (url, init) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'content-type': 'application/json' },
    });
  });
  return { client, calls };
}

describe('submitGoal', () => {
  it('accepting the recommendation posts source=accepted', async () => {
    const { client, calls } = stubClient();
    const cycle = await submitGoal(client, 'scenario:minutes-intuitive', 'minutes', 65, 'accepted');
    expect(cycle).toEqual(storedCycle);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe('/goals');
    expect(calls[0]!.init?.method).toBe('POST');
    expect(JSON.parse(String(calls[0]!.init?.body))).toEqual({
      student_id: 'scenario:minutes-intuitive',
      goal_type: 'minutes',
      value: 65,
      source: 'accepted',
    });
  });

  it('adjusting to a different value posts source=adjusted', async () => {
    const { client, calls } = stubClient();
    await submitGoal(client, 'scenario:minutes-intuitive', 'minutes', 60, 'adjusted');
    expect(JSON.parse(String(calls[0]!.init?.body)).source).toBe('adjusted');
    expect(JSON.parse(String(calls[0]!.init?.body)).value).toBe(60);
  });

  it('rejects nonpositive values before any request', async () => {
    const { client, calls } = stubClient();
    await expect(submitGoal(client, 's', 'minutes', 0, 'manual')).rejects.toThrow(RangeError);
    await expect(submitGoal(client, 's', 'minutes', Number.NaN, 'manual')).rejects.toThrow(RangeError);
    expect(calls).toHaveLength(0);
  });

  it('surfaces server rejections as ApiError', async () => {
    const { client } = stubClient(422, { detail: 'goal value must be positive' });
    await expect(submitGoal(client, 's', 'minutes', 5, 'manual')).rejects.toThrow(ApiError);
  });
});

describe('ApiClient reads', () => {
  it('fetches scenarios and cycles from the expected routes', async () => {
    const { client, calls } = stubClient(200, []);
    await client.getScenarios();
    await client.getCycles('scenario:skills-counter');
    expect(calls.map((c) => c.url)).toEqual([
      '/scenarios',
      '/students/scenario%3Askills-counter/cycles',
    ]);
  });
});
