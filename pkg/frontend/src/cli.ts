/**
 * Minimal client for the model-evaluation HTTP protocol (see
 * ../../docs/protocol.md).  One file, no dependencies beyond Node's built-in
 * fetch and JSON; single-threaded.
 *
 * As a CLI:  node dist/cli.js <url> <model-name> <x1> [x2 ...]
 * prints one line per decoded output vector, values space-separated.
 */

export class ProtocolError extends Error {}

/** Structured error returned by the server ({"error": {code, message}}). */
export class RemoteError extends ProtocolError {
  constructor(public code: string, message: string) {
    super(`${code}: ${message}`);
  }
}

export class SchemaViolation extends ProtocolError {}

type Json = Record<string, unknown>;

function checkFinite(vectors: number[][], what: string): void {
  for (const vec of vectors) {
    for (const x of vec) {
      if (!Number.isFinite(x)) {
        throw new SchemaViolation(`non-finite value in ${what}: ${x}`);
      }
    }
  }
}

async function post(url: string, path: string, body: Json): Promise<Json> {
  const resp = await fetch(new URL(path, url), {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  const obj = (await resp.json()) as Json;
  if (typeof obj.error === "object" && obj.error !== null) {
    const err = obj.error as { code?: string; message?: string };
    throw new RemoteError(err.code ?? "InternalError", err.message ?? "");
  }
  if (!resp.ok) {
    throw new ProtocolError(`HTTP ${resp.status} from ${path}`);
  }
  return obj;
}

export async function getInfo(
  url: string,
): Promise<{ protocolVersion: string; models: string[] }> {
  const resp = await fetch(new URL("/info", url));
  const obj = (await resp.json()) as Json;
  if (!Array.isArray(obj.models)) {
    throw new SchemaViolation("info response missing models list");
  }
  return obj as { protocolVersion: string; models: string[] };
}

export async function getInputSizes(url: string, name: string): Promise<number[]> {
  const obj = await post(url, "/input-sizes", { name, config: {} });
  return obj.inputSizes as number[];
}

export async function getOutputSizes(url: string, name: string): Promise<number[]> {
  const obj = await post(url, "/output-sizes", { name, config: {} });
  return obj.outputSizes as number[];
}

export async function evaluate(
  url: string,
  name: string,
  inputs: number[][],
  config: Json = {},
): Promise<number[][]> {
  checkFinite(inputs, "input");
  const obj = await post(url, "/evaluate", { name, input: inputs, config });
  const output = obj.output;
  if (
    !Array.isArray(output) ||
    !output.every((v) => Array.isArray(v) && v.every((x) => typeof x === "number"))
  ) {
    throw new SchemaViolation("evaluate response missing output vectors");
  }
  checkFinite(output as number[][], "output");
  return output as number[][];
}

async function main(argv: string[]): Promise<number> {
  if (argv.length < 3) {
    console.error("usage: cli.js <url> <model-name> <x1> [x2 ...]");
    return 2;
  }
  const [url, name, ...rest] = argv;
  const vector = rest.map((s) => {
    const x = Number(s);
    if (Number.isNaN(x)) {
      throw new SchemaViolation(`not a number: ${s}`);
    }
    return x;
  });
  const outputs = await evaluate(url, name, [vector]);
  for (const vec of outputs) {
    console.log(vec.join(" "));
  }
  return 0;
}

const entry = process.argv[1];
if (entry !== undefined && import.meta.url === new URL(`file://${entry}`).href) {
  main(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(String(err instanceof Error ? err.message : err));
      process.exit(1);
    },
  );
}
