/**
 * Scripted browser test: drives the mounted app through a 10-face fixture
 * using only keyboard events, then checks the exported diff against the
 * decision script and that a double-submit records a single decision.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { mount, type App } from "../src/main.js";
import { MockService } from "./mockService.js";

function key(k: string): void {
  window.dispatchEvent(new KeyboardEvent("keydown", { key: k, bubbles: true }));
}

function setup(service: MockService): App {
  window.__MASKPIPE_TEST__ = true;
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app")!;
  return mount(root, {
    fetchImpl: service.fetch,
    win: window,
    reviewer: "keyboard-test",
    openExport: () => {},
  });
}

describe("review app", () => {
  let app: App | null = null;

  beforeEach(() => {
    app?.unbind();
    app = null;
  });

  it("reviews the 10-face fixture with keyboard only; export matches the script", async () => {
    const service = MockService.tenFaceFixture();
    app = setup(service);
    await app.queue.settle();

    // One key per queue item, in (frame, index) order. Sets always flip
    // the fixture's label, so every entry lands in the diff.
    const script = ["n", "k", "r", "n", "m", "k", "n", "m", "k", "r"];
    for (const k of script) {
      key(k);
      await app.queue.settle();
    }

    expect(app.queue.getState().phase).toBe("complete");
    expect(document.querySelector(".complete")).not.toBeNull();
    expect(document.body.textContent).toContain("Review complete");

    const api = new ApiClient(service.fetch);
    const exported = await api.fetchExport();
    expect(exported.split("\n")).toEqual([
      "#maskpipe-relabel v1",
      "g0\t0\tSetNoMask",
      "g1\t0\tRemove",
      "g1\t1\tSetNoMask",
      "g2\t0\tSetMask",
      "g3\t0\tSetNoMask",
      "g3\t1\tSetMask",
      "g4\t1\tRemove",
      "",
    ]);
    const progress = await api.fetchProgress();
    expect(progress).toEqual({ pending: 0, decided: 10, total: 10 });
  });

  it("double-submit on a slow network records one decision", async () => {
    const service = MockService.tenFaceFixture();
    app = setup(service);
    await app.queue.settle();

    // Two rapid presses: the second lands while the first is in flight.
    key("n");
    key("n");
    await app.queue.settle();
    expect(service.appendCounts.get("g0:0")).toBe(1);

    // Idempotent retry at the API level is absorbed by the service.
    const api = new ApiClient(service.fetch);
    const retry = await api.submitDecision("g0:0", "SetNoMask", "keyboard-test");
    expect(retry.duplicate).toBe(true);
    expect(service.appendCounts.get("g0:0")).toBe(1);
  });

  it("three pending faces render three cards", async () => {
    const service = new MockService([
      { frame_id: "a", index: 0, label: "Mask" },
      { frame_id: "a", index: 1, label: "NoMask" },
      { frame_id: "b", index: 0, label: "Mask" },
    ]);
    app = setup(service);
    await app.queue.settle();
    expect(document.querySelectorAll(".card").length).toBe(3);
    expect(document.querySelector(".card.focused")?.getAttribute("data-face-id")).toBe("a:0");
    expect(document.querySelectorAll(".upcoming-card").length).toBe(2);
  });

  it("renders the label color convention on boxes and badge", async () => {
    const service = MockService.tenFaceFixture();
    app = setup(service);
    await app.queue.settle();

    // First item is a Mask face: green convention on its crop and context.
    expect(document.querySelector(".badge.mask")).not.toBeNull();
    expect(document.querySelectorAll(".card.focused .region.mask").length).toBe(2);

    key("k");
    await app.queue.settle();
    // Second item is a No-mask face: red convention.
    expect(document.querySelector(".badge.nomask")).not.toBeNull();
    expect(document.querySelectorAll(".card.focused .region.nomask").length).toBe(2);
  });

  it("service offline shows a retry banner and recovers without crashing", async () => {
    const service = MockService.tenFaceFixture();
    service.offline = true;
    app = setup(service);
    await app.queue.settle();

    expect(document.querySelector(".banner.error")).not.toBeNull();
    const retry = document.querySelector<HTMLButtonElement>("button.retry");
    expect(retry).not.toBeNull();

    service.offline = false;
    retry!.click();
    await app.queue.settle();
    expect(app.queue.getState().phase).toBe("reviewing");
    expect(document.querySelector(".card")).not.toBeNull();
  });

  it("all four actions are reachable by keyboard alone", async () => {
    const service = MockService.tenFaceFixture();
    app = setup(service);
    await app.queue.settle();

    for (const k of ["m", "n", "r", "k"]) {
      // m on a Mask face normalizes out of the export but still decides it.
      key(k);
      await app.queue.settle();
    }
    const api = new ApiClient(service.fetch);
    expect((await api.fetchProgress()).decided).toBe(4);
    const actions = [...service.latest.values()].map((d) => d.action);
    expect(actions).toEqual(["SetMask", "SetNoMask", "Remove", "Keep"]);
  });
});
