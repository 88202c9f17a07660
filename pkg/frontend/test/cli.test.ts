/**
 * Conformance tests against a live protocol server spawned from the Python
 * package.  The 50-request corpus is also decoded by the Python client and
 * the two decoded responses are compared element-for-element.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RemoteError, SchemaViolation, evaluate, getInfo, getInputSizes, getOutputSizes } from "../src/cli";

const PYTHON = "python3";

interface Server {
  proc: ChildProcess;
  url: string;
  dir: string;
}

async function startServer(args: string[]): Promise<Server> {
  const dir = mkdtempSync(join(tmpdir(), "conformance-"));
  const regFile = join(dir, "reg.txt");
  const proc = spawn(PYTHON, ["-m", "uqlb.models.server", ...args, "--reg-file", regFile], {
    stdio: "ignore",
  });
  const deadline = Date.now() + 30_000;
  while (Date.now() < deadline) {
    try {
      const line = readFileSync(regFile, "utf8").trim();
      if (line.includes(":")) {
        return { proc, url: `http://${line}`, dir };
      }
    } catch {
      // not registered yet
    }
    await new Promise((r) => setTimeout(r, 50));
  }
  proc.kill();
  throw new Error("server never registered");
}

function stopServer(server: Server): void {
  server.proc.kill();
  rmSync(server.dir, { recursive: true, force: true });
}

/** Decode a batch of requests with the Python client; returns outputs per request. */
function primaryClientBatch(
  url: string,
  requests: { name: string; input: number[][] }[],
): number[][][] {
  const script = [
    "import json, sys",
    "from uqlb.protocol import client_evaluate",
    "reqs = json.load(open(sys.argv[1]))",
    "outs = [client_evaluate(sys.argv[2], r['name'], r['input']) for r in reqs]",
    "json.dump(outs, open(sys.argv[3], 'w'))",
  ].join("\n");
  const dir = mkdtempSync(join(tmpdir(), "corpus-"));
  const reqFile = join(dir, "requests.json");
  const outFile = join(dir, "responses.json");
  writeFileSync(reqFile, JSON.stringify(requests));
  const result = spawnSync(PYTHON, ["-c", script, reqFile, url, outFile], {
    encoding: "utf8",
  });
  if (result.status !== 0) {
    throw new Error(`primary client failed: ${result.stderr}`);
  }
  const outputs = JSON.parse(readFileSync(outFile, "utf8")) as number[][][];
  rmSync(dir, { recursive: true, force: true });
  return outputs;
}

/** Deterministic pseudo-random corpus values (mulberry32). */
function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("identity model", () => {
  let server: Server;

  beforeAll(async () => {
    server = await startServer(["--model", "example", "--input-dim", "3"]);
  }, 40_000);

  afterAll(() => stopServer(server));

  it("echoes [[7]] shaped input", async () => {
    const out = await evaluate(server.url, "modelname", [[7, 0, 0]]);
    expect(out).toEqual([[7, 0, 0]]);
  });

  it("info lists the served model", async () => {
    const info = await getInfo(server.url);
    expect(info.models).toContain("modelname");
    expect(info.protocolVersion).toBe("1.0");
  });

  it("reports declared sizes", async () => {
    expect(await getInputSizes(server.url, "modelname")).toEqual([3]);
    expect(await getOutputSizes(server.url, "modelname")).toEqual([3]);
  });

  it("surfaces structured server errors", async () => {
    await expect(evaluate(server.url, "no-such-model", [[1, 2, 3]])).rejects.toThrow(
      RemoteError,
    );
  });

  it("rejects non-finite input client-side", async () => {
    await expect(evaluate(server.url, "modelname", [[Infinity, 0, 0]])).rejects.toThrow(
      SchemaViolation,
    );
  });

  it("50-request corpus matches the primary client exactly", async () => {
    const next = rng(77);
    const requests = Array.from({ length: 50 }, () => ({
      name: "modelname",
      input: [[next() * 20 - 10, next() * 20 - 10, next() * 20 - 10]],
    }));
    const primary = primaryClientBatch(server.url, requests);
    for (let i = 0; i < requests.length; i++) {
      const secondary = await evaluate(server.url, requests[i].name, requests[i].input);
      expect(secondary).toEqual(primary[i]);
    }
  }, 60_000);
});

describe("gp surrogate model", () => {
  let server: Server;

  beforeAll(async () => {
    server = await startServer(["--model", "gp"]);
  }, 40_000);

  afterAll(() => stopServer(server));

  it("posterior mean matches the primary client's decode", async () => {
    // mid-box query point; both clients decode the same deterministic server
    const point = [5.5, 2.5, 5.0, 3.25, 0.15, 0.05, 0.5];
    const primary = primaryClientBatch(server.url, [{ name: "gp", input: [point] }]);
    const secondary = await evaluate(server.url, "gp", [point]);
    expect(secondary).toEqual(primary[0]);
  }, 30_000);
});
