import { describe, expect, it } from "vitest";

import { connect } from "../src/client.js";
import type { SocketLike } from "../src/client.js";

type Handler = (event: { data?: unknown }) => void;

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  private handlers = new Map<string, Handler[]>();

  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.closed = true;
  }
  addEventListener(type: string, handler: Handler): void {
    const list = this.handlers.get(type) ?? [];
    list.push(handler);
    this.handlers.set(type, list);
  }
  emit(type: string, data?: unknown): void {
    for (const h of this.handlers.get(type) ?? []) h({ data });
  }
}

const state = (tick: number, phase = "first_half") =>
  JSON.stringify({
    type: "state",
    tick,
    phase,
    puck: [0.5, 1, 0, 0],
    you: [0.5, 0.25],
    opp: [0.5, 1.75],
    score: [0, 0],
  });

describe("connect", () => {
  it("sends hello on open", () => {
    const sock = new FakeSocket();
    connect(sock, { method: "fast_adapt", seed: 7 });
    sock.emit("open");
    expect(JSON.parse(sock.sent[0]!)).toEqual({
      type: "hello",
      method: "fast_adapt",
      seed: 7,
    });
  });

  it("sends exactly one input per received state", () => {
    const sock = new FakeSocket();
    const handle = connect(sock, { method: "ladder" });
    sock.emit("open");
    handle.setTarget([0.5, -0.25]);
    sock.emit("message", state(1));
    sock.emit("message", state(2));
    sock.emit(
      "message",
      JSON.stringify({ type: "score", tick: 2, score: [1, 0] }),
    );
    const inputs = sock.sent
      .map((s) => JSON.parse(s))
      .filter((m) => m.type === "input");
    expect(inputs.length).toBe(2);
    expect(inputs[0].target).toEqual([0.5, -0.25]);
  });

  it("does not send an input for the finished state", () => {
    const sock = new FakeSocket();
    connect(sock, { method: "ladder" });
    sock.emit("open");
    sock.emit("message", state(195, "finished"));
    const inputs = sock.sent
      .map((s) => JSON.parse(s))
      .filter((m) => m.type === "input");
    expect(inputs.length).toBe(0);
  });

  it("ignores malformed server messages but counts them", () => {
    const logs: string[] = [];
    const sock = new FakeSocket();
    const handle = connect(sock, {
      method: "ladder",
      onLog: (l) => logs.push(l),
    });
    sock.emit("open");
    sock.emit("message", "not json");
    sock.emit("message", JSON.stringify({ type: "mystery" }));
    sock.emit("message", state(1));
    expect(handle.malformedCount()).toBe(2);
    expect(logs.length).toBe(2);
    expect(handle.view().latest?.tick).toBe(1);
  });

  it("flags a reconnect prompt when the server goes away", () => {
    const sock = new FakeSocket();
    const handle = connect(sock, { method: "ladder" });
    sock.emit("open");
    expect(handle.needsReconnect()).toBe(false);
    sock.emit("close");
    expect(handle.needsReconnect()).toBe(true);
    expect(handle.view().status).toBe("closed");
  });

  it("folds state into the view", () => {
    const sock = new FakeSocket();
    const handle = connect(sock, { method: "ladder" });
    sock.emit("open");
    sock.emit("message", state(4));
    expect(handle.view().phase).toBe("first_half");
    expect(handle.view().buffer.length).toBe(1);
  });
});
