import { spawn, ChildProcess } from "node:child_process";

export interface TestServer {
  baseUrl: string;
  stop: () => void;
}

let shared: Promise<TestServer> | null = null;
let process_: ChildProcess | null = null;

async function launch(port: number): Promise<TestServer> {
  const child = spawn(
    "python3",
    ["-m", "expressforge.server", "--addr", `127.0.0.1:${port}`],
    { stdio: ["ignore", "pipe", "pipe"], cwd: "/root/pkg" },
  );
  process_ = child;
  let stderr = "";
  child.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`server exited early: ${stderr}`);
    }
    try {
      const res = await fetch(`${baseUrl}/chain`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill();
      throw new Error(`server did not come up: ${stderr}`);
    }
    await sleep(200);
  }
  return { baseUrl, stop: () => child.kill() };
}

/** One server process shared across a test file. */
export function testServer(port = 8471): Promise<TestServer> {
  if (shared === null) {
    shared = launch(port);
  }
  return shared;
}

export function stopTestServer(): void {
  process_?.kill();
  process_ = null;
  shared = null;
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Poll until the condition holds; fails loudly on timeout. */
export async function waitFor(
  condition: () => boolean,
  timeoutMs = 5_000,
  label = "condition",
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!condition()) {
    if (Date.now() > deadline) {
      throw new Error(`timed out waiting for ${label}`);
    }
    await sleep(10);
  }
}

let participantCounter = 0;

export function uniqueParticipant(prefix: string): string {
  participantCounter += 1;
  return `${prefix}-${Date.now()}-${participantCounter}`;
}
