/** Shape of the exported analysis bundle the explorer consumes. */

export interface BoundaryInfo {
  entropy: number;
  flag: boolean;
}

export interface Institution {
  id: string;
  name: string;
  primary_type: string;
  secondary_type?: string | null;
  country: string;
  founding_year: number;
  axis_texts: Record<string, string>;
  coords2d: [number, number];
  cluster: number;
  palette_index: number;
  topic_weights: number[];
  top_similar: Array<[string, number]>;
  boundary: BoundaryInfo;
}

export interface TopicDescriptor {
  axis: number;
  axis_key: string;
  codeword: number;
  weight: number;
  tokens: string[];
}

export interface Topic {
  topic: number;
  descriptors: TopicDescriptor[];
}

export interface RunMetadata {
  config_hash: string;
  seed: number;
  selected_algorithm: string;
  k_effective: number;
  [key: string]: unknown;
}

export interface Bundle {
  schema_version: number;
  institutions: Institution[];
  topics: Topic[];
  cluster_count: number;
  run_metadata: RunMetadata;
}
