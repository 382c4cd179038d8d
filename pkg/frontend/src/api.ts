/**
 * Typed client for the planner service. Response shapes mirror the
 * service's published schemas; every payload carries the manifest digest
 * of the workspace snapshot it was computed from, which the app uses to
 * detect that nothing mutated server-side during a session.
 */

export type GraphMetrics = {
  avg_path_length: number;
  avg_eccentricity: number;
  diameter: number;
  node_count: number;
  edge_count: number;
  reachable_pairs?: number;
  sampled: boolean;
  degenerate?: boolean;
};

export type GraphSummary = {
  manifest_digest: string;
  node_count: number;
  edge_count: number;
  total_weight: number;
  component_count: number;
  giant_size: number;
  coverage: number;
  giant_metrics: GraphMetrics;
};

export type Feature = {
  type: "Feature";
  geometry: { type: "Point" | "LineString"; coordinates: number[] | number[][] };
  properties: Record<string, unknown>;
};

export type FeatureCollection = {
  type: "FeatureCollection";
  features: Feature[];
};

export type GraphGeojson = FeatureCollection & { manifest_digest: string };

export type CommunityStats = {
  community_id: number;
  node_count: number;
  diameter: number;
  normalized_diameter: number;
  density: number;
  avg_clustering: number;
  avg_weighted_degree: number;
  avg_weighted_degree_full: number;
};

export type Communities = {
  manifest_digest: string;
  community_count: number;
  modularity: number;
  levels: number;
  seed: number;
  resolution: number;
  centers: Record<string, string>;
  stats: CommunityStats[];
  geojson: FeatureCollection;
};

export type FlowEntry = {
  day_class: string;
  community_count: number;
  matrix: number[][];
  unassigned: number;
  od_pairs?: number;
  days?: number;
  intra?: number;
  inter?: number;
  pct_intra?: number;
  pct_inter?: number;
  top_inter_pairs?: { communities: [number, number]; flow: number }[];
};

export type Flows = {
  manifest_digest: string;
  day_classes: Record<string, FlowEntry>;
  notes: string[];
};

export type TrajectoryPoint = {
  step: number;
  apl: number;
  avg_ecc: number;
  diameter: number;
  delta_apl: number;
  delta_ecc: number;
  delta_diam: number;
  duplicates?: [string, string][];
};

export type PlanStep = {
  step: number;
  communities: [number, number];
  centers: [string, string];
  flow: number;
  weight: number;
};

export type Preview = {
  manifest_digest: string;
  steps: PlanStep[];
  trajectory: TrajectoryPoint[];
};

export type CommittedPlan = {
  manifest_digest: string;
  plan: {
    centers: Record<string, string>;
    steps: (PlanStep & { edges: [string, string][] })[];
  };
  trajectory: TrajectoryPoint[];
};

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

async function request<R>(base: string, path: string, init?: RequestInit): Promise<R> {
  const response = await fetch(base + path, init);
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as R;
}

export class PlannerApi {
  constructor(readonly base: string = "") {}

  graphSummary(): Promise<GraphSummary> {
    return request(this.base, "/api/graph/summary");
  }

  graphGeojson(): Promise<GraphGeojson> {
    return request(this.base, "/api/graph/geojson");
  }

  communities(): Promise<Communities> {
    return request(this.base, "/api/communities");
  }

  flows(dayClass?: string): Promise<Flows | (FlowEntry & { manifest_digest: string })> {
    const suffix = dayClass ? `?day_class=${encodeURIComponent(dayClass)}` : "";
    return request(this.base, `/api/flows${suffix}`);
  }

  allFlows(): Promise<Flows> {
    return this.flows() as Promise<Flows>;
  }

  committedPlan(): Promise<CommittedPlan> {
    return request(this.base, "/api/interventions/plan");
  }

  preview(pairs: [number, number][]): Promise<Preview> {
    return request(this.base, "/api/interventions/preview", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pairs }),
    });
  }
}
