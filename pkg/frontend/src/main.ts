import { ApiClient, type FetchLike } from "./api.js";
import { bindKeyboard } from "./keyboard.js";
import { ReviewQueue } from "./queue.js";
import { render } from "./render.js";

export interface App {
  queue: ReviewQueue;
  unbind: () => void;
}

/** Mount the review app into `root`; fetch and window are injectable. */
export function mount(
  root: HTMLElement,
  options: { fetchImpl?: FetchLike; win?: Window; reviewer?: string; openExport?: (url: string) => void } = {},
): App {
  const win = options.win ?? window;
  const api = new ApiClient(options.fetchImpl);
  const reviewer = options.reviewer ?? "reviewer";
  const openExport = options.openExport ?? ((url: string) => win.open(url, "_blank"));

  const handlers = {
    onAction: (action: Parameters<ReviewQueue["submit"]>[0]) => {
      queue.submit(action);
    },
    onRetry: () => {
      queue.retry();
    },
    onExport: () => {
      openExport(api.exportUrl());
    },
  };

  const queue = new ReviewQueue(api, reviewer, (state) => render(root, state, handlers));
  const unbind = bindKeyboard(win, {
    onAction: handlers.onAction,
    onExport: handlers.onExport,
  });
  queue.start();
  return { queue, unbind };
}

declare global {
  interface Window {
    __MASKPIPE_TEST__?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__MASKPIPE_TEST__) {
  const root = document.getElementById("app");
  if (root) mount(root);
}
