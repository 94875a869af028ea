// DOM rendering for the step wizard. The view is a pure function of the
// controller state and is rebuilt on every change notification; no business
// state lives in the DOM.

import { WizardController } from "./wizard.js";
import type { EvidenceBlock, StageId } from "./types.js";
import { DIMENSION_LABELS, DIMENSIONS, STAGES } from "./types.js";

const STEP_LABELS: Record<StageId, string> = {
  peg: "1. Peg",
  main_argument: "2. Main argument",
  supporting_arguments: "3. Supporting arguments",
  evidence: "4. Evidence",
  combination: "5. Combination",
};

const STRUCTURES = ["parallel", "progressive", "contrasting"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = []
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Citation markers [n] become links to the reference snippets below the block. */
export function renderEvidenceHtml(block: EvidenceBlock, index: number): string {
  const escaped = escapeHtml(block.text);
  return escaped.replace(/\[(\d+)\]/g, (whole, n) => {
    const num = Number(n);
    if (num >= 1 && num <= block.references.length) {
      return `<a class="ref-link" href="#ref-${index}-${num}">[${num}]</a>`;
    }
    return whole;
  });
}

export class WizardView {
  private unsubscribe: () => void;

  constructor(private root: HTMLElement, private controller: WizardController) {
    this.unsubscribe = controller.subscribe(() => this.render());
    this.render();
  }

  dispose(): void {
    this.unsubscribe();
  }

  render(): void {
    const c = this.controller;
    this.root.replaceChildren();

    if (c.lastError) {
      this.root.append(
        el("div", { class: "banner banner-error", role: "alert" }, [
          `${c.lastError.code}: ${c.lastError.message}`,
        ])
      );
    }
    if (c.pending) {
      this.root.append(el("div", { class: "banner banner-pending" }, ["working…"]));
    }

    if (!c.session) {
      this.root.append(this.renderStartForm());
      return;
    }

    this.root.append(this.renderRail());
    this.root.append(this.renderActivePanel());
    this.root.append(this.renderEvaluationPanel());

    for (const warning of c.session.warnings.slice(-3)) {
      this.root.append(el("div", { class: "banner banner-warning" }, [warning]));
    }
  }

  private renderStartForm(): HTMLElement {
    const keywords = el("input", { id: "start-keywords", placeholder: "keywords" });
    const detail = el("textarea", {
      id: "start-detail",
      placeholder: "or paste the event detail manually",
    });
    const button = el("button", { id: "start-button" }, ["Start session"]);
    button.addEventListener("click", () => {
      const input: { keywords?: string; event_detail?: string } = {};
      if (keywords.value.trim()) input.keywords = keywords.value.trim();
      if (detail.value.trim()) input.event_detail = detail.value.trim();
      void this.controller.start(input).catch(() => undefined);
    });
    return el("section", { class: "start-form" }, [
      el("h1", {}, ["New commentary"]),
      keywords,
      detail,
      button,
    ]);
  }

  private renderRail(): HTMLElement {
    const c = this.controller;
    const active = c.activeStepIndex();
    const items = STAGES.map((stage, index) => {
      const status = c.stageStatus(stage);
      const classes = ["rail-step", `state-${status}`];
      if (index === active) classes.push("active");
      const children: (Node | string)[] = [STEP_LABELS[stage]];
      if (status === "stale") {
        children.push(el("span", { class: "badge-stale" }, ["stale"]));
      }
      const item = el("li", { class: classes.join(" "), "data-stage": stage }, children);
      item.addEventListener("click", () => c.goToStep(index));
      return item;
    });
    return el("ol", { class: "rail", id: "rail" }, items);
  }

  private renderActivePanel(): HTMLElement {
    switch (this.controller.activeStep()) {
      case "peg":
        return this.renderPegPanel();
      case "main_argument":
        return this.renderMainArgumentPanel();
      case "supporting_arguments":
        return this.renderSupportingPanel();
      case "evidence":
        return this.renderEvidencePanel();
      case "combination":
        return this.renderCombinationPanel();
    }
  }

  private editBox(target: "peg" | "main_argument" | "title" | "ending",
                  value: string): HTMLElement {
    const c = this.controller;
    const box = el("textarea", { class: "edit-box", id: `edit-${target}` });
    box.value = value;
    box.addEventListener("input", () => c.markDirty(target));
    const save = el("button", { class: "save-edit", id: `save-${target}` }, ["Save edit"]);
    (save as HTMLButtonElement).disabled = c.pending;
    save.addEventListener("click", () => {
      void c.saveEdit(target, box.value).catch(() => undefined);
    });
    return el("div", { class: "editor" }, [box, save]);
  }

  private renderPegPanel(): HTMLElement {
    const c = this.controller;
    const session = c.session!;
    const regen = el("button", { id: "generate-peg", class: "regen" }, ["Generate peg"]);
    (regen as HTMLButtonElement).disabled = !c.canRun("peg");
    regen.addEventListener("click", () => void c.generatePeg().catch(() => undefined));
    return el("section", { class: "panel", id: "step-peg" }, [
      el("h2", {}, [STEP_LABELS.peg]),
      el("p", { class: "detail" }, [session.event_detail]),
      el("pre", { class: "output", id: "peg-output" }, [session.peg]),
      regen,
      this.editBox("peg", session.peg),
    ]);
  }

  private renderMainArgumentPanel(): HTMLElement {
    const c = this.controller;
    const session = c.session!;
    const regen = el("button", { id: "generate-candidates", class: "regen" }, [
      "Generate candidates (10 directions)",
    ]);
    (regen as HTMLButtonElement).disabled = !c.canRun("main_argument");
    regen.addEventListener("click", () =>
      void c.generateMainArguments().catch(() => undefined)
    );

    // server ordering preserved; scores shown at 2 decimals
    const items = session.candidates.map((candidate) => {
      const select = el("button", { class: "select-candidate" }, ["Select"]);
      (select as HTMLButtonElement).disabled = c.pending;
      select.addEventListener("click", () =>
        void c.selectCandidate(candidate.rank).catch(() => undefined)
      );
      return el("li", { class: "candidate", "data-rank": String(candidate.rank) }, [
        el("span", { class: "rank" }, [`#${candidate.rank}`]),
        el("span", { class: "direction" }, [candidate.direction]),
        el("span", { class: "score" }, [candidate.score.toFixed(2)]),
        el("span", { class: "text" }, [candidate.text]),
        select,
      ]);
    });

    return el("section", { class: "panel", id: "step-main_argument" }, [
      el("h2", {}, [STEP_LABELS.main_argument]),
      regen,
      el("ol", { class: "candidates" }, items),
      el("pre", { class: "output", id: "main-argument-output" }, [session.main_argument]),
      this.editBox("main_argument", session.main_argument),
    ]);
  }

  private renderSupportingPanel(): HTMLElement {
    const c = this.controller;
    const session = c.session!;
    const picker = el(
      "select",
      { id: "structure-picker" },
      STRUCTURES.map((s) => el("option", { value: s }, [s]))
    );
    if (session.structure) (picker as HTMLSelectElement).value = session.structure;
    const regen = el("button", { id: "generate-supporting", class: "regen" }, [
      "Generate supporting arguments",
    ]);
    (regen as HTMLButtonElement).disabled = !c.canRun("supporting_arguments");
    regen.addEventListener("click", () =>
      void c
        .generateSupportingArguments((picker as HTMLSelectElement).value)
        .catch(() => undefined)
    );

    const boxes = session.supporting_arguments.map((argument, i) => {
      const box = el("textarea", { class: "edit-box argument-box", "data-index": String(i) });
      box.value = argument;
      box.addEventListener("input", () => c.markDirty("supporting_arguments"));
      return el("li", {}, [box]);
    });
    const save = el("button", { id: "save-supporting_arguments", class: "save-edit" }, [
      "Save edits",
    ]);
    (save as HTMLButtonElement).disabled = c.pending || boxes.length === 0;
    save.addEventListener("click", () => {
      const values = Array.from(
        this.root.querySelectorAll<HTMLTextAreaElement>(".argument-box")
      ).map((b) => b.value);
      void c.saveEdit("supporting_arguments", values).catch(() => undefined);
    });

    return el("section", { class: "panel", id: "step-supporting_arguments" }, [
      el("h2", {}, [STEP_LABELS.supporting_arguments]),
      picker,
      regen,
      el("ol", { class: "arguments" }, boxes),
      save,
    ]);
  }

  private renderEvidencePanel(): HTMLElement {
    const c = this.controller;
    const session = c.session!;
    const blocks = session.supporting_arguments.map((argument, index) => {
      const block = session.evidence[index];
      const generate = el(
        "button",
        { class: "generate-evidence", "data-index": String(index) },
        [block ? "Regenerate evidence" : "Generate evidence"]
      );
      (generate as HTMLButtonElement).disabled = !c.canRun("evidence");
      generate.addEventListener("click", () =>
        void c.generateEvidence(index).catch(() => undefined)
      );
      const children: (Node | string)[] = [
        el("h3", {}, [`Argument ${index + 1}`]),
        el("p", { class: "argument" }, [argument]),
        generate,
      ];
      if (block) {
        const text = el("div", { class: "evidence-text" });
        text.innerHTML = renderEvidenceHtml(block, index);
        children.push(text);
        children.push(
          el(
            "ul",
            { class: "references" },
            block.references.map((ref) =>
              el("li", { id: `ref-${index}-${ref.ref_number}`, class: "reference" }, [
                `[${ref.ref_number}] (${ref.norm_score.toFixed(2)}) ${ref.snippet}`,
              ])
            )
          )
        );
        if (!block.grounded) {
          children.push(el("p", { class: "ungrounded-note" }, ["no references above threshold"]));
        }
      }
      return el("article", { class: "evidence-block", "data-index": String(index) }, children);
    });
    return el("section", { class: "panel", id: "step-evidence" }, [
      el("h2", {}, [STEP_LABELS.evidence]),
      ...blocks,
    ]);
  }

  private renderCombinationPanel(): HTMLElement {
    const c = this.controller;
    const session = c.session!;
    const combine = el("button", { id: "combine", class: "regen" }, [
      "Generate title & ending",
    ]);
    (combine as HTMLButtonElement).disabled = !c.canRun("combination");
    combine.addEventListener("click", () => void c.combine().catch(() => undefined));

    const children: (Node | string)[] = [
      el("h2", {}, [STEP_LABELS.combination]),
      combine,
    ];
    if (session.stage_valid.combination) {
      const exportButton = el("button", { id: "export-md" }, ["Export Markdown"]);
      exportButton.addEventListener("click", () => {
        void c.exportMarkdown().then((markdown) => {
          const blob = new Blob([markdown], { type: "text/markdown" });
          const link = el("a", {
            href: URL.createObjectURL(blob),
            download: `${session.id}.md`,
          });
          link.click();
        });
      });
      children.push(
        el("pre", { class: "output", id: "title-output" }, [session.title]),
        this.editBox("title", session.title),
        el("pre", { class: "output", id: "ending-output" }, [session.ending]),
        this.editBox("ending", session.ending),
        exportButton
      );
    }
    return el("section", { class: "panel", id: "step-combination" }, children);
  }

  private renderEvaluationPanel(): HTMLElement {
    const c = this.controller;
    const complete = Boolean(c.session?.stage_valid.combination);
    const children: (Node | string)[] = [el("h2", {}, ["Evaluation"])];

    if (!c.report) {
      const evaluateButton = el("button", { id: "evaluate" }, ["Evaluate commentary"]);
      (evaluateButton as HTMLButtonElement).disabled = !complete || c.pending;
      evaluateButton.addEventListener("click", () =>
        void c.evaluate().catch(() => undefined)
      );
      children.push(
        complete
          ? evaluateButton
          : el("p", { class: "hint" }, ["complete the five steps, then evaluate"])
      );
    } else {
      const report = c.report;
      const bars = DIMENSIONS.map((dimension) => {
        const value = report.scores[dimension] ?? 0;
        const bar = el("div", { class: "bar", style: `width: ${value * 10}%` });
        return el("div", { class: "score-row", "data-dimension": dimension }, [
          el("span", { class: "label" }, [DIMENSION_LABELS[dimension]]),
          el("span", { class: "value" }, [value.toFixed(1)]),
          bar,
        ]);
      });
      children.push(
        ...bars,
        el("p", { class: "overall", id: "overall-score" }, [
          `Overall: ${report.overall.toFixed(1)}`,
        ]),
        el(
          "details",
          { class: "transcripts" },
          [
            el("summary", {}, ["judge transcripts"]),
            ...DIMENSIONS.map((dimension) =>
              el("pre", { class: "transcript", "data-dimension": dimension }, [
                report.judge_transcripts[dimension] ?? "",
              ])
            ),
          ]
        )
      );
      const timeliness = el("input", {
        id: "timeliness-input",
        type: "number",
        min: "1",
        max: "10",
        step: "0.5",
        placeholder: "timeliness (human)",
      });
      if (report.timeliness !== null) {
        (timeliness as HTMLInputElement).value = String(report.timeliness);
      }
      const saveTimeliness = el("button", { id: "save-timeliness" }, ["Save timeliness"]);
      saveTimeliness.addEventListener("click", () => {
        const value = Number((timeliness as HTMLInputElement).value);
        if (value >= 1 && value <= 10) {
          void c.saveTimeliness(value).catch(() => undefined);
        }
      });
      children.push(el("div", { class: "timeliness" }, [timeliness, saveTimeliness]));
    }
    return el("section", { class: "panel", id: "evaluation-panel" }, children);
  }
}
