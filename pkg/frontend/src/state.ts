/** Local draft buffering: answers and the client-generated annotation id
 * live in localStorage until the service acknowledges the submission, so a
 * page reload (or a retried request) can neither lose work nor create a
 * second annotation for the same task. */

export interface Draft {
  annotationId: string;
  answers: Record<string, string>;
}

function key(annotatorId: string, taskId: string): string {
  return `mdseval-draft:${annotatorId}:${taskId}`;
}

export function newAnnotationId(): string {
  const c = globalThis.crypto as Crypto | undefined;
  if (c?.randomUUID) return c.randomUUID();
  return `anno-${Date.now()}-${Math.random().toString(36).slice(2, 10)}`;
}

export function loadDraft(annotatorId: string, taskId: string): Draft {
  const raw = localStorage.getItem(key(annotatorId, taskId));
  if (raw) {
    try {
      const parsed = JSON.parse(raw) as Draft;
      if (parsed.annotationId) return parsed;
    } catch {
      // fall through to a fresh draft
    }
  }
  const draft: Draft = { annotationId: newAnnotationId(), answers: {} };
  saveDraft(annotatorId, taskId, draft);
  return draft;
}

export function saveDraft(annotatorId: string, taskId: string, draft: Draft): void {
  localStorage.setItem(key(annotatorId, taskId), JSON.stringify(draft));
}

export function clearDraft(annotatorId: string, taskId: string): void {
  localStorage.removeItem(key(annotatorId, taskId));
}
