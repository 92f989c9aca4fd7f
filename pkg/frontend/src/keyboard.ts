import type { ReviewAction } from "./types.js";

const KEY_TO_ACTION: Record<string, ReviewAction> = {
  m: "SetMask",
  n: "SetNoMask",
  r: "Remove",
  k: "Keep",
};

export function actionForKey(key: string): ReviewAction | null {
  return KEY_TO_ACTION[key.toLowerCase()] ?? null;
}

export function isTypingTarget(target: EventTarget | null): boolean {
  return (
    target instanceof HTMLInputElement ||
    target instanceof HTMLTextAreaElement ||
    (target instanceof HTMLElement && target.isContentEditable)
  );
}

/** Bind M/N/R/K to decisions and E to export; returns an unbind function. */
export function bindKeyboard(
  win: Window,
  handlers: { onAction: (action: ReviewAction) => void; onExport: () => void },
): () => void {
  const listener = (event: KeyboardEvent) => {
    if (event.defaultPrevented || event.ctrlKey || event.metaKey || event.altKey) return;
    if (isTypingTarget(event.target)) return;
    if (event.key.toLowerCase() === "e") {
      event.preventDefault();
      handlers.onExport();
      return;
    }
    const action = actionForKey(event.key);
    if (action) {
      event.preventDefault();
      handlers.onAction(action);
    }
  };
  win.addEventListener("keydown", listener);
  return () => win.removeEventListener("keydown", listener);
}
