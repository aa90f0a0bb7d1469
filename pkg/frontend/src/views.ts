/** DOM construction for the annotation views. All question and option
 * strings are rendered verbatim from the task payload served by the API;
 * nothing protocol-specific is hardcoded here. */

import type { FacetTaskPayload, PairwiseTaskPayload, AnnotatorProgress } from "./api.js";
import type { Draft } from "./state.js";

export interface FormHandlers {
  onChange: (answers: Record<string, string>) => void;
  onSubmit: (answers: Record<string, string>) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function textPanel(title: string, body: string, className: string): HTMLElement {
  const panel = el("section", `panel ${className}`);
  panel.appendChild(el("h3", "panel-title", title));
  panel.appendChild(el("p", "panel-body", body));
  return panel;
}

export function renderProgress(mine: AnnotatorProgress | undefined): HTMLElement {
  const wrap = el("div", "progress");
  const done = mine?.done ?? 0;
  const total = mine?.total ?? 0;
  const bar = el("div", "progress-track");
  const fill = el("div", "progress-fill");
  fill.style.width = total > 0 ? `${Math.round((100 * done) / total)}%` : "0%";
  bar.appendChild(fill);
  wrap.appendChild(bar);
  wrap.appendChild(el("span", "progress-label", `${done} / ${total} tasks completed`));
  return wrap;
}

interface AnswerState {
  answers: Record<string, string>;
  requiredFields: string[];
}

function submitRow(state: AnswerState, handlers: FormHandlers, needsComment: () => boolean) {
  const row = el("div", "submit-row");
  const button = el("button", "submit-button", "Submit") as HTMLButtonElement;
  button.type = "button";
  const hint = el("span", "submit-hint", "");

  const complete = () =>
    state.requiredFields.every((f) => state.answers[f]) &&
    (!needsComment() || (state.answers["comment"] ?? "").trim().length > 0);

  const refresh = () => {
    button.disabled = !complete();
    hint.textContent = button.disabled ? "Answer every question to submit." : "";
  };
  refresh();

  button.addEventListener("click", () => {
    if (!complete()) return;
    button.disabled = true;
    handlers.onSubmit({ ...state.answers });
  });

  row.appendChild(button);
  row.appendChild(hint);
  return { row, refresh };
}

export function renderFacetForm(
  payload: FacetTaskPayload,
  draft: Draft,
  handlers: FormHandlers,
): HTMLElement {
  const root = el("div", "task facet-task");
  root.appendChild(textPanel("Target summary", payload.target, "target-panel"));
  root.appendChild(textPanel("Generated summary", payload.generated, "generated-panel"));

  const state: AnswerState = {
    answers: { ...draft.answers },
    requiredFields: payload.questions.map((q) => q.field),
  };
  const anyOther = () => payload.questions.some((q) => state.answers[q.field] === "Other");

  const form = el("form", "facet-form");
  form.addEventListener("submit", (e) => e.preventDefault());

  const commentBox = el("div", "comment-box");
  const commentLabel = el("label", "comment-label", "Comment (required for “Other” answers)");
  const commentInput = el("textarea") as HTMLTextAreaElement;
  commentInput.name = "comment";
  commentInput.value = state.answers["comment"] ?? "";
  commentBox.appendChild(commentLabel);
  commentBox.appendChild(commentInput);

  let refreshSubmit = () => {};
  const syncCommentVisibility = () => {
    commentBox.style.display = anyOther() ? "" : "none";
  };

  for (const question of payload.questions) {
    const fieldset = el("fieldset", "question");
    fieldset.dataset.questionId = question.id;
    fieldset.appendChild(el("legend", "question-text", question.text));
    for (const option of question.options) {
      const label = el("label", "option");
      const input = el("input") as HTMLInputElement;
      input.type = "radio";
      input.name = question.field;
      input.value = option.code;
      if (state.answers[question.field] === option.code) input.checked = true;
      input.addEventListener("change", () => {
        state.answers[question.field] = option.code;
        syncCommentVisibility();
        handlers.onChange({ ...state.answers });
        refreshSubmit();
      });
      label.appendChild(input);
      label.appendChild(el("span", "option-label", `${option.code}: ${option.label}`));
      fieldset.appendChild(label);
    }
    form.appendChild(fieldset);
  }

  commentInput.addEventListener("input", () => {
    state.answers["comment"] = commentInput.value;
    handlers.onChange({ ...state.answers });
    refreshSubmit();
  });
  form.appendChild(commentBox);

  const { row, refresh } = submitRow(state, handlers, anyOther);
  refreshSubmit = refresh;
  syncCommentVisibility();
  form.appendChild(row);
  root.appendChild(form);
  return root;
}

export function renderPairwiseForm(
  payload: PairwiseTaskPayload,
  draft: Draft,
  handlers: FormHandlers,
): HTMLElement {
  const root = el("div", "task pairwise-task");
  root.appendChild(textPanel("Target summary", payload.target, "target-panel"));
  root.appendChild(textPanel("Summary A", payload.summary_a, "a-panel"));
  root.appendChild(textPanel("Summary B", payload.summary_b, "b-panel"));

  const state: AnswerState = { answers: { ...draft.answers }, requiredFields: ["preference"] };

  const form = el("form", "pairwise-form");
  form.addEventListener("submit", (e) => e.preventDefault());
  const fieldset = el("fieldset", "question");
  fieldset.appendChild(el("legend", "question-text", payload.question.text));

  let refreshSubmit = () => {};
  for (const option of payload.question.options) {
    const label = el("label", "option");
    const input = el("input") as HTMLInputElement;
    input.type = "radio";
    input.name = "preference";
    input.value = option;
    if (state.answers["preference"] === option) input.checked = true;
    input.addEventListener("change", () => {
      state.answers["preference"] = option;
      handlers.onChange({ ...state.answers });
      refreshSubmit();
    });
    label.appendChild(input);
    label.appendChild(el("span", "option-label", option));
    fieldset.appendChild(label);
  }
  form.appendChild(fieldset);

  const justification = el("div", "comment-box");
  justification.appendChild(el("label", "comment-label", "Justification (optional)"));
  const textarea = el("textarea") as HTMLTextAreaElement;
  textarea.name = "justification";
  textarea.value = state.answers["justification"] ?? "";
  textarea.addEventListener("input", () => {
    state.answers["justification"] = textarea.value;
    handlers.onChange({ ...state.answers });
  });
  justification.appendChild(textarea);
  form.appendChild(justification);

  const { row, refresh } = submitRow(state, handlers, () => false);
  refreshSubmit = refresh;
  form.appendChild(row);
  root.appendChild(form);
  return root;
}

export function renderDone(): HTMLElement {
  const root = el("div", "done-screen");
  root.appendChild(el("h2", undefined, "All tasks completed"));
  root.appendChild(el("p", undefined, "Thank you! There are no tasks left in your queue."));
  return root;
}

export function renderError(message: string, onRetry: () => void): HTMLElement {
  const root = el("div", "error-screen");
  root.appendChild(el("p", "error-message", message));
  const retry = el("button", "retry-button", "Retry") as HTMLButtonElement;
  retry.type = "button";
  retry.addEventListener("click", onRetry);
  root.appendChild(retry);
  return root;
}

export function renderInlineError(message: string): HTMLElement {
  return el("p", "inline-error", message);
}
