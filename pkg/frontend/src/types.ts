// Wire types mirroring the service's published JSON schemas (/schema).

export type GoalType = 'minutes' | 'skills';
export type Variant = 'none' | 'value_only' | 'value_plus_explanation';
export type GoalSource = 'accepted' | 'adjusted' | 'manual';
export type Intuition = 'intuitive' | 'counter_intuitive';
export type Direction = 'raise' | 'lower' | 'hold';

export interface GoalCycle {
  student_id: string;
  cycle_index: number;
  goal_type: GoalType;
  target_value: number;
  achieved_value: number;
  period_start: string;
  period_end: string;
  completed: boolean;
  source: GoalSource;
}

export interface CitedFeature {
  feature_name: string;
  value: number;
}

export interface Recommendation {
  goal_type: GoalType;
  variant: Variant;
  value: number | null;
  direction: Direction | null;
  explanation: string | null;
  cited_features: CitedFeature[];
}

export interface Scenario {
  scenario_id: string;
  student_id: string;
  title: string;
  goal_type: GoalType;
  intuition: Intuition;
  cycles: GoalCycle[];
  expected_direction: string;
}
