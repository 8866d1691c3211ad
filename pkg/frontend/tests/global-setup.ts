/** Boots the real engine with a scripted mock model for the test run.
 *
 * The script gives every ask the same shape (topic entity "heart", a
 * confident answer at depth 1) against a store preseeded with two facts
 * about the heart, so each ask returns two evidence triples regardless of
 * test ordering. Every feedback generates one unique new fact.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const SERVER_INFO_PATH = join(dirname(fileURLToPath(import.meta.url)), ".server.json");

let proc: ChildProcess | undefined;
let workDir: string | undefined;

function writeServerFiles(dir: string): string {
  const storePath = join(dir, "kg.jsonl");
  writeFileSync(
    storePath,
    [
      JSON.stringify({ id: 1, head: "heart", relation: "pumps", tail: "blood" }),
      JSON.stringify({ id: 2, head: "heart", relation: "rests between", tail: "beats" }),
    ].join("\n") + "\n",
  );

  const script: Array<{ match: string; reply: string }> = [];
  for (let i = 0; i < 60; i++) {
    script.push({ match: "entity", reply: JSON.stringify({ entities: ["heart"] }) });
    script.push({
      match: "reason",
      reply: JSON.stringify({
        confidence: "Yes",
        answer: "the heart pumps blood",
        support_info: "scripted support",
      }),
    });
  }
  for (let i = 0; i < 30; i++) {
    script.push({
      match: "generate",
      reply: JSON.stringify({
        triples: [{ head: `harvested fact ${i}`, relation: "learned from", tail: "feedback" }],
      }),
    });
  }
  const scriptPath = join(dir, "script.jsonl");
  writeFileSync(scriptPath, script.map((row) => JSON.stringify(row)).join("\n") + "\n");

  const configPath = join(dir, "config.toml");
  writeFileSync(
    configPath,
    [
      `store_path = ${JSON.stringify(storePath)}`,
      `audit_log_path = ${JSON.stringify(join(dir, "audit.jsonl"))}`,
      'llm = "mock"',
      `mock_script = ${JSON.stringify(scriptPath)}`,
      "",
      "[pipeline]",
      'strategy = "em"',
    ].join("\n") + "\n",
  );
  return configPath;
}

async function waitForHealth(base: string): Promise<void> {
  const deadline = Date.now() + 60000;
  for (;;) {
    try {
      const response = await fetch(`${base}/api/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("engine service did not become healthy in 60s");
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

export default async function setup(): Promise<() => Promise<void>> {
  workDir = mkdtempSync(join(tmpdir(), "wts-console-"));
  const configPath = writeServerFiles(workDir);
  const port = 8900 + Math.floor(Math.random() * 800);
  const base = `http://127.0.0.1:${port}`;

  proc = spawn("python3", ["-m", "wts.cli", "--config", configPath, "serve"], {
    env: { ...process.env, WTS_HOST: "127.0.0.1", WTS_PORT: String(port) },
    stdio: ["ignore", "pipe", "pipe"],
  });
  proc.stderr?.on("data", (chunk: Buffer) => {
    const text = chunk.toString();
    if (text.includes("Traceback")) console.error("[engine]", text);
  });

  await waitForHealth(base);
  writeFileSync(SERVER_INFO_PATH, JSON.stringify({ base }));
  process.env.WTS_CONSOLE_BASE = base;

  return async () => {
    proc?.kill("SIGTERM");
    await new Promise((resolve) => setTimeout(resolve, 300));
    proc?.kill("SIGKILL");
    rmSync(SERVER_INFO_PATH, { force: true });
    if (workDir) rmSync(workDir, { recursive: true, force: true });
  };
}
