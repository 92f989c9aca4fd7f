import type { QueueState } from "./queue.js";
import type { Box, ReviewAction } from "./types.js";

export interface RenderHandlers {
  onAction: (action: ReviewAction) => void;
  onRetry: () => void;
  onExport: () => void;
}

const CROP_ZOOM = 3;
const CONTEXT_SCALE = 1.5;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Image panel showing a box region at a fixed zoom, CSS-transform based. */
function regionView(
  doc: Document,
  imageUrl: string,
  box: Box,
  zoom: number,
  className: string,
): HTMLElement {
  const [x0, y0, x1, y1] = box;
  const panel = el(doc, "div", `region ${className}`);
  panel.style.width = `${(x1 - x0) * zoom}px`;
  panel.style.height = `${(y1 - y0) * zoom}px`;
  const img = el(doc, "img");
  img.src = imageUrl;
  img.alt = "";
  img.style.transformOrigin = "0 0";
  img.style.transform = `scale(${zoom}) translate(${-x0}px, ${-y0}px)`;
  panel.appendChild(img);
  return panel;
}

export function render(root: HTMLElement, state: QueueState, handlers: RenderHandlers): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  root.appendChild(renderHeader(doc, state, handlers));

  if (state.phase === "loading") {
    root.appendChild(el(doc, "p", "status", "loading…"));
    return;
  }
  if (state.phase === "error") {
    const banner = el(doc, "div", "banner error");
    banner.appendChild(el(doc, "span", undefined, `service unreachable: ${state.errorMessage ?? ""}`));
    const retry = el(doc, "button", "retry", "Retry");
    retry.onclick = () => handlers.onRetry();
    banner.appendChild(retry);
    root.appendChild(banner);
    return;
  }
  if (state.phase === "complete") {
    const done = el(doc, "div", "complete");
    done.appendChild(el(doc, "h2", undefined, "Review complete"));
    const exportBtn = el(doc, "button", "export", "Export diff");
    exportBtn.onclick = () => handlers.onExport();
    done.appendChild(exportBtn);
    root.appendChild(done);
    return;
  }

  const item = state.current;
  if (!item) return;
  const labelClass = item.current_label === "Mask" ? "mask" : "nomask";

  // The focused card is the one the keyboard acts on.
  const card = el(doc, "div", "card focused");
  card.dataset.faceId = item.face_id;

  const badge = el(
    doc,
    "span",
    `badge ${labelClass}`,
    item.current_label === "Mask" ? "Mask" : "No-mask",
  );
  const title = el(doc, "div", "card-title");
  title.appendChild(el(doc, "span", "face-id", item.face_id));
  title.appendChild(badge);
  card.appendChild(title);

  const panels = el(doc, "div", "panels");
  // Enlarged crop next to its surroundings; box color encodes the label
  // (green = Mask, red = No-mask).
  panels.appendChild(regionView(doc, item.image_url, item.box, CROP_ZOOM, `crop ${labelClass}`));
  panels.appendChild(
    regionView(doc, item.image_url, item.context_box, CONTEXT_SCALE, `context ${labelClass}`),
  );
  card.appendChild(panels);

  if (state.inlineError) {
    card.appendChild(el(doc, "div", "banner inline-error", state.inlineError));
  }

  const actions = el(doc, "div", "actions");
  const buttons: Array<[ReviewAction, string, string]> = [
    ["SetMask", "Mask", "M"],
    ["SetNoMask", "No-mask", "N"],
    ["Remove", "Remove", "R"],
    ["Keep", "Keep", "K"],
  ];
  for (const [action, label, key] of buttons) {
    const button = el(doc, "button", `action ${action}`, `${label} (${key})`);
    button.disabled = state.submitting;
    button.onclick = () => handlers.onAction(action);
    actions.appendChild(button);
  }
  card.appendChild(actions);
  card.appendChild(
    el(doc, "p", "hint", "Keys: M mask, N no-mask, R remove, K keep, E export"),
  );
  root.appendChild(card);

  if (state.upcoming.length) {
    const strip = el(doc, "div", "upcoming");
    strip.appendChild(el(doc, "span", "upcoming-title", "Up next"));
    for (const next of state.upcoming) {
      const mini = el(doc, "div", "card upcoming-card");
      mini.dataset.faceId = next.face_id;
      const cls = next.current_label === "Mask" ? "mask" : "nomask";
      mini.appendChild(regionView(doc, next.image_url, next.box, 1, `crop ${cls}`));
      mini.appendChild(el(doc, "span", "face-id", next.face_id));
      strip.appendChild(mini);
    }
    root.appendChild(strip);
  }
}

function renderHeader(doc: Document, state: QueueState, handlers: RenderHandlers): HTMLElement {
  const header = el(doc, "header");
  header.appendChild(el(doc, "h1", undefined, "maskpipe review"));
  const progress = el(doc, "div", "progress");
  if (state.progress) {
    const { decided, total, pending } = state.progress;
    progress.appendChild(
      el(doc, "span", "progress-text", `${decided} / ${total} decided, ${pending} pending`),
    );
    const bar = el(doc, "div", "bar");
    const fill = el(doc, "div", "fill");
    fill.style.width = total ? `${(100 * decided) / total}%` : "0%";
    bar.appendChild(fill);
    progress.appendChild(bar);
  }
  const exportBtn = el(doc, "button", "export", "Export (E)");
  exportBtn.onclick = () => handlers.onExport();
  progress.appendChild(exportBtn);
  header.appendChild(progress);
  return header;
}
