// Wizard state machine. Holds only UI state (active step, dirty flags,
// pending indicator) plus the latest server snapshot; every mutation is one
// API call and the snapshot is whatever the server last returned, so a page
// reload reconstructs the whole wizard from GET /v1/sessions/{id}.

import { ApiClient, ApiError } from "./api.js";
import type { EditTarget, EvaluationReport, Session, StageId, StageStatus } from "./types.js";
import { STAGES } from "./types.js";

export type Listener = () => void;

export class WizardController {
  session: Session | null = null;
  report: EvaluationReport | null = null;
  pending = false;
  lastError: ApiError | null = null;
  dirty: Partial<Record<EditTarget, boolean>> = {};
  pollIntervalMs = 1000;

  private requestedStep = 0;
  private listeners: Listener[] = [];
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  constructor(public api: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  // --- derived state ----------------------------------------------------------

  stageStatus(stage: StageId): StageStatus {
    return this.session?.stage_status[stage] ?? "empty";
  }

  firstInvalidIndex(): number {
    if (!this.session) return 0;
    for (let i = 0; i < STAGES.length; i++) {
      if (!this.session.stage_valid[STAGES[i]]) return i;
    }
    return STAGES.length - 1; // everything valid: the last step stays active
  }

  activeStepIndex(): number {
    // never ahead of the first invalid stage
    return Math.min(this.requestedStep, this.firstInvalidIndex());
  }

  activeStep(): StageId {
    return STAGES[this.activeStepIndex()];
  }

  goToStep(index: number): void {
    this.requestedStep = Math.max(0, Math.min(index, STAGES.length - 1));
    this.notify();
  }

  /** Generation for a stage is allowed only when all its predecessors are valid. */
  canRun(stage: StageId): boolean {
    if (!this.session || this.pending) return false;
    const index = STAGES.indexOf(stage);
    return STAGES.slice(0, index).every((s) => this.session!.stage_valid[s]);
  }

  isStale(stage: StageId): boolean {
    return this.stageStatus(stage) === "stale";
  }

  markDirty(target: EditTarget): void {
    // deliberately no notify: a re-render would rebuild the edit box from the
    // server snapshot and wipe the user's unsaved text
    this.dirty[target] = true;
  }

  // --- mutations (single in-flight, 1s snapshot polling while running) ---------

  private async run<T>(operation: () => Promise<T>, apply: (value: T) => void): Promise<T> {
    if (this.pending) {
      throw new ApiError(0, "busy", "another request is in flight");
    }
    this.pending = true;
    this.lastError = null;
    this.notify();
    this.startPolling();
    try {
      const value = await operation();
      apply(value);
      return value;
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastError = error;
        this.notify();
      }
      throw error;
    } finally {
      this.stopPolling();
      this.pending = false;
      this.notify();
    }
  }

  private startPolling(): void {
    if (!this.session) return;
    const id = this.session.id;
    this.pollTimer = setInterval(() => {
      this.api
        .getSession(id)
        .then((snapshot) => {
          this.session = snapshot;
          this.notify();
        })
        .catch(() => undefined); // transient; the mutation result wins
    }, this.pollIntervalMs);
  }

  private stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async start(input: { keywords?: string; event_detail?: string }): Promise<void> {
    await this.run(
      () => this.api.startSession(input),
      (session) => {
        this.session = session;
        this.requestedStep = 0;
        this.report = null;
      }
    );
  }

  /** Reload purely from the server; used on page load and after errors. */
  async refresh(id?: string): Promise<void> {
    const sessionId = id ?? this.session?.id;
    if (!sessionId) return;
    const snapshot = await this.api.getSession(sessionId);
    this.session = snapshot;
    this.notify();
  }

  async generatePeg(): Promise<void> {
    await this.run(
      () => this.api.generatePeg(this.requireSession().id),
      (session) => (this.session = session)
    );
  }

  async generateMainArguments(directions?: string[]): Promise<void> {
    await this.run(
      () => this.api.generateMainArguments(this.requireSession().id, directions),
      ({ session }) => (this.session = session)
    );
  }

  async selectCandidate(rank: number): Promise<void> {
    await this.run(
      () => this.api.selectMainArgument(this.requireSession().id, { rank }),
      (session) => (this.session = session)
    );
  }

  async generateSupportingArguments(structure: string): Promise<void> {
    await this.run(
      () => this.api.generateSupportingArguments(this.requireSession().id, structure),
      (session) => (this.session = session)
    );
  }

  async generateEvidence(index: number): Promise<void> {
    await this.run(
      () => this.api.generateEvidence(this.requireSession().id, index),
      (session) => (this.session = session)
    );
  }

  async combine(): Promise<void> {
    await this.run(
      () => this.api.combine(this.requireSession().id),
      ({ session }) => (this.session = session)
    );
  }

  async saveEdit(target: EditTarget, output: string | string[]): Promise<void> {
    await this.run(
      () => this.api.editStage(this.requireSession().id, target, output),
      (session) => {
        this.session = session;
        this.dirty[target] = false;
      }
    );
  }

  async exportMarkdown(): Promise<string> {
    return this.api.exportMarkdown(this.requireSession().id);
  }

  async evaluate(): Promise<EvaluationReport> {
    // read the canonical article text, then one evaluate call
    const text = await this.api.exportMarkdown(this.requireSession().id);
    return this.run(
      () => this.api.evaluate(text),
      (report) => (this.report = report)
    );
  }

  async saveTimeliness(value: number): Promise<void> {
    const id = this.requireSession().id;
    await this.run(
      () => this.api.importHumanScores({ item_id: id, timeliness: value }),
      () => {
        if (this.report) this.report.timeliness = value;
      }
    );
  }

  private requireSession(): Session {
    if (!this.session) {
      throw new ApiError(0, "bad_request", "no session started");
    }
    return this.session;
  }
}
