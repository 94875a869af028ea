// JSON shapes served by the /v1 API.

export type StageId =
  | "peg"
  | "main_argument"
  | "supporting_arguments"
  | "evidence"
  | "combination";

export const STAGES: StageId[] = [
  "peg",
  "main_argument",
  "supporting_arguments",
  "evidence",
  "combination",
];

export type StageStatus = "empty" | "valid" | "stale";

export type EditTarget =
  | "peg"
  | "main_argument"
  | "supporting_arguments"
  | "evidence"
  | "title"
  | "ending";

export interface RankedCandidate {
  text: string;
  direction: string;
  score: number;
  rank: number;
}

export interface RetrievalResult {
  record_id: string;
  raw_score: number;
  norm_score: number;
  snippet: string;
  ref_number: number;
}

export interface EvidenceBlock {
  text: string;
  references: RetrievalResult[];
  grounded: boolean;
}

export interface Session {
  id: string;
  keywords: string | null;
  event_detail: string;
  peg: string;
  candidates: RankedCandidate[];
  main_argument: string;
  structure: string | null;
  supporting_arguments: string[];
  evidence: (EvidenceBlock | null)[];
  title: string;
  ending: string;
  stage_status: Record<StageId, StageStatus>;
  stage_valid: Record<StageId, boolean>;
  history: { ts: string; op: string; origin: string }[];
  warnings: string[];
}

export interface CommentaryJson {
  title: string;
  main_argument: string;
  sections: { supporting_argument: string; evidence: EvidenceBlock }[];
  ending: string;
  assembled_text: string;
}

export interface EvaluationReport {
  item_id: string | null;
  scores: Record<string, number>;
  overall: number;
  timeliness: number | null;
  judged_by: string;
  judge_transcripts: Record<string, string>;
}

export const DIMENSIONS = [
  "structure_soundness",
  "logic_consistency",
  "argument_quality",
  "evidence_support",
  "language_finesse",
] as const;

export const DIMENSION_LABELS: Record<string, string> = {
  structure_soundness: "Structure",
  logic_consistency: "Logic",
  argument_quality: "Argument",
  evidence_support: "Evidence",
  language_finesse: "Language",
};

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}
