import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { callSchemas, kernelNames, type KernelArgs, type KernelName } from "./schema.js";

export { kernelNames, type KernelArgs, type KernelName } from "./schema.js";

/** The native interpreter could not be spawned or did not identify itself. */
export class LoadError extends Error {}

/** A call failed shape validation before any subprocess was spawned. */
export class CallShapeError extends Error {}

/** The native CLI rejected the batch (nonzero exit). */
export class KernelError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(message);
  }
}

export interface MetricResult {
  value: number;
  frame_valid: boolean;
}

export interface AdvantageResult {
  advantages: number[];
}

export type KernelResult = number | MetricResult | AdvantageResult;

export interface KernelCall {
  fn: KernelName;
  args: unknown;
  id?: string | number;
}

export interface BindOptions {
  /** Interpreter to spawn; defaults to $GROUNDEVAL_PYTHON, then "python3". */
  python?: string;
}

export interface BoundFunctionTable {
  version: string;
  python: string;
  call(fn: KernelName, args: unknown): KernelResult;
  callMany(calls: KernelCall[]): KernelResult[];
  rewardTrajectory(args: KernelArgs<"reward_trajectory">): number;
  rewardAffordance(args: KernelArgs<"reward_affordance">): number;
  rewardArea(args: KernelArgs<"reward_area">): number;
  groupAdvantages(args: KernelArgs<"group_advantages">): AdvantageResult;
  grpoSurrogate(args: KernelArgs<"grpo_surrogate">): number;
  scoreGrounding(args: KernelArgs<"score_grounding">): MetricResult;
  scoreArea(args: KernelArgs<"score_area">): MetricResult;
  scoreAffordance(args: KernelArgs<"score_affordance">): MetricResult;
  scoreTrajectory(args: KernelArgs<"score_trajectory">): MetricResult;
  scoreGrasp(args: KernelArgs<"score_grasp">): MetricResult;
}

function resolvePython(opts?: BindOptions): string {
  return opts?.python ?? process.env.GROUNDEVAL_PYTHON ?? "python3";
}

// The native side serializes +-inf the way its stdlib does (bare Infinity
// tokens); strict JSON.parse rejects those, so quote them first and revive.
// Batch results never carry free-form strings, making the rewrite safe.
const NONFINITE = /(?<![\w"])(-?Infinity|NaN)(?![\w"])/g;
const SENTINEL: Record<string, number> = {
  Infinity: Infinity,
  "-Infinity": -Infinity,
  NaN: NaN,
};

export function parseResultLine(line: string): { id: string | number; fn: string; result: KernelResult } {
  const quoted = line.replace(NONFINITE, (tok) => `"__nonfinite:${tok}"`);
  return JSON.parse(quoted, (_key, value) => {
    if (typeof value === "string" && value.startsWith("__nonfinite:")) {
      return SENTINEL[value.slice("__nonfinite:".length)];
    }
    return value;
  });
}

function runBatch(python: string, callLines: string[]): string[] {
  const dir = mkdtempSync(join(tmpdir(), "groundeval-"));
  const callsPath = join(dir, "calls.jsonl");
  const outPath = join(dir, "results.jsonl");
  try {
    writeFileSync(callsPath, callLines.join("\n") + "\n", "utf8");
    try {
      execFileSync(
        python,
        ["-m", "groundeval.cli", "batch", "--calls", callsPath, "--out", outPath],
        { encoding: "utf8", maxBuffer: 64 * 1024 * 1024, stdio: ["ignore", "pipe", "pipe"] },
      );
    } catch (err) {
      const e = err as { status?: number | null; stderr?: string; message?: string };
      if (typeof e.status === "number") {
        throw new KernelError(
          `groundeval batch exited ${e.status}: ${(e.stderr ?? "").trim()}`,
          e.status,
          e.stderr ?? "",
        );
      }
      throw new LoadError(`failed to spawn ${python}: ${e.message ?? String(err)}`);
    }
    return readFileSync(outPath, "utf8")
      .split("\n")
      .filter((l) => l.trim().length > 0);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function validateCall(call: KernelCall, index: number): void {
  const schema = callSchemas[call.fn];
  if (!schema) {
    throw new CallShapeError(`call ${index}: unknown kernel ${String(call.fn)}`);
  }
  const parsed = schema.safeParse(call.args);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    const where = issue.path.length ? ` at ${issue.path.join(".")}` : "";
    throw new CallShapeError(`call ${index} (${call.fn})${where}: ${issue.message}`);
  }
}

export function bindAll(opts?: BindOptions): BoundFunctionTable {
  const python = resolvePython(opts);
  let version: string;
  try {
    version = execFileSync(python, ["-m", "groundeval.cli", "--version"], {
      encoding: "utf8",
      stdio: ["ignore", "pipe", "pipe"],
    }).trim();
  } catch (err) {
    const e = err as { message?: string };
    throw new LoadError(`cannot load groundeval via ${python}: ${e.message ?? String(err)}`);
  }
  if (!/^\d+\.\d+\.\d+/.test(version)) {
    throw new LoadError(`unexpected version string from ${python}: ${version!}`);
  }

  const callMany = (calls: KernelCall[]): KernelResult[] => {
    calls.forEach(validateCall);
    if (calls.length === 0) return [];
    const lines = calls.map((c, i) =>
      JSON.stringify({ id: c.id ?? i, fn: c.fn, args: c.args }),
    );
    const outLines = runBatch(python, lines);
    if (outLines.length !== calls.length) {
      throw new KernelError(
        `expected ${calls.length} results, got ${outLines.length}`,
        0,
        "",
      );
    }
    return outLines.map((line, i) => {
      const parsed = parseResultLine(line);
      const expected = calls[i].id ?? i;
      if (String(parsed.id) !== String(expected)) {
        throw new KernelError(
          `result ${i} id mismatch: expected ${String(expected)}, got ${String(parsed.id)}`,
          0,
          "",
        );
      }
      return parsed.result;
    });
  };

  const call = (fn: KernelName, args: unknown): KernelResult =>
    callMany([{ fn, args }])[0];

  return {
    version,
    python,
    call,
    callMany,
    rewardTrajectory: (args) => call("reward_trajectory", args) as number,
    rewardAffordance: (args) => call("reward_affordance", args) as number,
    rewardArea: (args) => call("reward_area", args) as number,
    groupAdvantages: (args) => call("group_advantages", args) as AdvantageResult,
    grpoSurrogate: (args) => call("grpo_surrogate", args) as number,
    scoreGrounding: (args) => call("score_grounding", args) as MetricResult,
    scoreArea: (args) => call("score_area", args) as MetricResult,
    scoreAffordance: (args) => call("score_affordance", args) as MetricResult,
    scoreTrajectory: (args) => call("score_trajectory", args) as MetricResult,
    scoreGrasp: (args) => call("score_grasp", args) as MetricResult,
  };
}
