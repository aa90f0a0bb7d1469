/** Controller: fetches the next task, renders it, and pushes submissions
 * through the idempotent annotation endpoint. Network failures keep local
 * state and offer a retry; a duplicate acknowledgment advances exactly like
 * a fresh one. */

import { ApiClient, ApiError, type TaskPayload } from "./api.js";
import { clearDraft, loadDraft, saveDraft, type Draft } from "./state.js";
import {
  renderDone,
  renderError,
  renderFacetForm,
  renderInlineError,
  renderPairwiseForm,
  renderProgress,
} from "./views.js";

export class AnnotatorApp {
  private current: TaskPayload | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly annotatorId: string,
  ) {}

  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    try {
      this.current = await this.api.nextTask(this.annotatorId);
    } catch (err) {
      this.showError(err, () => void this.advance());
      return;
    }
    await this.renderCurrent();
  }

  private async renderCurrent(): Promise<void> {
    this.root.replaceChildren();
    try {
      const progress = await this.api.progress();
      this.root.appendChild(renderProgress(progress.annotators[this.annotatorId]));
    } catch {
      // progress display is best-effort; the task flow works without it
    }
    if (this.current === null) {
      this.root.appendChild(renderDone());
      return;
    }
    const task = this.current;
    const draft = loadDraft(this.annotatorId, task.task_id);
    const handlers = {
      onChange: (answers: Record<string, string>) => {
        saveDraft(this.annotatorId, task.task_id, { ...draft, answers });
      },
      onSubmit: (answers: Record<string, string>) => void this.submit(task, draft, answers),
    };
    const view =
      task.kind === "facet"
        ? renderFacetForm(task, draft, handlers)
        : renderPairwiseForm(task, draft, handlers);
    this.root.appendChild(view);
  }

  private async submit(
    task: TaskPayload,
    draft: Draft,
    answers: Record<string, string>,
  ): Promise<void> {
    const body = {
      annotation_id: draft.annotationId,
      annotator_id: this.annotatorId,
      task_id: task.task_id,
      ...answers,
    };
    try {
      await this.api.submit(body);
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        const form = this.root.querySelector("form");
        form?.appendChild(renderInlineError(err.message));
        form?.querySelectorAll<HTMLButtonElement>(".submit-button")
          .forEach((b) => (b.disabled = false));
        return;
      }
      this.showError(err, () => void this.submit(task, draft, answers));
      return;
    }
    // success or duplicate ack: either way the judgment is durably logged
    clearDraft(this.annotatorId, task.task_id);
    await this.advance();
  }

  private showError(err: unknown, retry: () => void): void {
    const message =
      err instanceof ApiError
        ? `${err.code}: ${err.message}`
        : "Could not reach the annotation service.";
    this.root.replaceChildren(renderError(message, retry));
  }
}

export function boot(root: HTMLElement, baseUrl: string, annotatorId: string): AnnotatorApp {
  const app = new AnnotatorApp(root, new ApiClient(baseUrl), annotatorId);
  void app.start();
  return app;
}

// browser entry: ?annotator=ID[&api=http://host:port]
if (typeof document !== "undefined" && document.getElementById("mdseval-root")) {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator");
  const api = params.get("api") ?? window.location.origin;
  const root = document.getElementById("mdseval-root") as HTMLElement;
  if (annotator) {
    boot(root, api, annotator);
  } else {
    root.textContent = "Add ?annotator=<your id> to the URL to begin.";
  }
}
