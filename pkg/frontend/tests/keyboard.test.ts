import { describe, expect, it, vi } from "vitest";

import { actionForKey, bindKeyboard } from "../src/keyboard.js";

describe("actionForKey", () => {
  it("maps the four review keys, case-insensitive", () => {
    expect(actionForKey("m")).toBe("SetMask");
    expect(actionForKey("M")).toBe("SetMask");
    expect(actionForKey("n")).toBe("SetNoMask");
    expect(actionForKey("r")).toBe("Remove");
    expect(actionForKey("K")).toBe("Keep");
  });

  it("ignores everything else", () => {
    for (const key of ["x", "Enter", "ArrowLeft", " ", "1"]) {
      expect(actionForKey(key)).toBeNull();
    }
  });
});

describe("bindKeyboard", () => {
  it("dispatches actions and export, and unbinds", () => {
    const onAction = vi.fn();
    const onExport = vi.fn();
    const unbind = bindKeyboard(window, { onAction, onExport });

    window.dispatchEvent(new KeyboardEvent("keydown", { key: "m" }));
    window.dispatchEvent(new KeyboardEvent("keydown", { key: "e" }));
    expect(onAction).toHaveBeenCalledWith("SetMask");
    expect(onExport).toHaveBeenCalledTimes(1);

    unbind();
    window.dispatchEvent(new KeyboardEvent("keydown", { key: "n" }));
    expect(onAction).toHaveBeenCalledTimes(1);
  });

  it("ignores keys while typing in an input", () => {
    const onAction = vi.fn();
    const unbind = bindKeyboard(window, { onAction, onExport: vi.fn() });
    const input = document.createElement("input");
    document.body.appendChild(input);
    input.dispatchEvent(new KeyboardEvent("keydown", { key: "m", bubbles: true }));
    expect(onAction).not.toHaveBeenCalled();
    unbind();
    input.remove();
  });

  it("ignores modified keys", () => {
    const onAction = vi.fn();
    const unbind = bindKeyboard(window, { onAction, onExport: vi.fn() });
    window.dispatchEvent(new KeyboardEvent("keydown", { key: "m", ctrlKey: true }));
    expect(onAction).not.toHaveBeenCalled();
    unbind();
  });
});
