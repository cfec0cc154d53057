import { describe, expect, it } from "vitest";

import {
  helloMessage,
  inputMessage,
  parseServerMessage,
  validateStateMessage,
} from "../src/protocol.js";

const STATE = {
  type: "state",
  tick: 3,
  phase: "first_half",
  puck: [0.5, 1.0, 0.1, -0.2],
  you: [0.5, 0.25],
  opp: [0.5, 1.75],
  score: [1, 0],
};

describe("validateStateMessage", () => {
  it("accepts a well-formed state", () => {
    expect(validateStateMessage(STATE)).toBe(true);
  });

  it.each([
    ["wrong type", { ...STATE, type: "stat" }],
    ["negative tick", { ...STATE, tick: -1 }],
    ["unknown phase", { ...STATE, phase: "halftime" }],
    ["short puck tuple", { ...STATE, puck: [0.5, 1.0, 0.1] }],
    ["NaN position", { ...STATE, you: [NaN, 0.25] }],
    ["non-integer score", { ...STATE, score: [0.5, 0] }],
    ["negative score", { ...STATE, score: [-1, 0] }],
    ["null", null],
  ])("rejects %s", (_label, msg) => {
    expect(validateStateMessage(msg)).toBe(false);
  });
});

describe("parseServerMessage", () => {
  it("parses each message family", () => {
    expect(parseServerMessage(JSON.stringify(STATE))?.type).toBe("state");
    expect(
      parseServerMessage(
        JSON.stringify({ type: "phase", phase: "break", tick: 5, ticks: 10 }),
      )?.type,
    ).toBe("phase");
    expect(
      parseServerMessage(JSON.stringify({ type: "score", tick: 5, score: [1, 2] }))
        ?.type,
    ).toBe("score");
    expect(
      parseServerMessage(
        JSON.stringify({
          type: "report",
          method: "ladder",
          score: [2, 3],
          possession: 0.45,
          ticks: 195,
        }),
      )?.type,
    ).toBe("report");
  });

  it.each([
    ["not json", "{{{"],
    ["non-object", "42"],
    ["unknown type", JSON.stringify({ type: "surprise" })],
    ["bad state payload", JSON.stringify({ ...STATE, opp: "here" })],
    ["bad report", JSON.stringify({ type: "report", method: 7 })],
  ])("returns null for %s", (_label, raw) => {
    expect(parseServerMessage(raw)).toBeNull();
  });
});

describe("outbound messages", () => {
  it("hello carries method and seed", () => {
    expect(JSON.parse(helloMessage("fast_adapt", 4))).toEqual({
      type: "hello",
      method: "fast_adapt",
      seed: 4,
    });
  });

  it("input carries the target pair", () => {
    expect(JSON.parse(inputMessage([0.25, -1]))).toEqual({
      type: "input",
      target: [0.25, -1],
    });
  });
});
