/**
 * Wire protocol: newline-delimited JSON over stdio.
 *
 * Requests:
 *   {"id":n,"op":"evaluate","architecture":{...},"epochs":e,"dataset":"...","subset_size":s,"seed":k}
 *   {"id":n,"op":"param_count","architecture":{...}}
 *
 * Responses:
 *   {"id":n,"ok":true,"val_accuracy":a,"val_loss":l,"wall_seconds":t,"param_count":p,...}
 *   {"id":n,"ok":false,"error":"message"}
 *
 * Every request gets exactly one response. Unknown ops and malformed
 * requests answer ok:false rather than killing the process.
 */

import { parseDocument } from "./arch";
import { paramCount } from "./model";
import { runEvaluate, VAL_SPLIT_NOTE } from "./train";

export const HELLO = {
  op: "hello",
  max_parallelism: 1,
  val_split: VAL_SPLIT_NOTE,
  backend: "tfjs",
};

export interface Response {
  id: number | null;
  ok: boolean;
  [key: string]: unknown;
}

function fail(id: number | null, error: string): Response {
  return { id, ok: false, error };
}

async function handleEvaluate(id: number, msg: Record<string, unknown>): Promise<Response> {
  const doc = parseDocument(msg.architecture);
  const epochs = msg.epochs;
  if (!Number.isInteger(epochs) || (epochs as number) < 1) {
    throw new Error("epochs must be an integer >= 1");
  }
  if (typeof msg.dataset !== "string") {
    throw new Error("dataset must be a string");
  }
  const subset = msg.subset_size;
  if (subset != null && !Number.isInteger(subset)) {
    throw new Error("subset_size must be an integer or null");
  }
  // 64-bit engine seeds can exceed 2^53; the double rounding is harmless
  // since only the (rounded) value seeds init and shuffling.
  if (typeof msg.seed !== "number" || !Number.isInteger(msg.seed)) {
    throw new Error("seed must be an integer");
  }
  const result = await runEvaluate(
    doc,
    epochs as number,
    msg.dataset,
    subset as number | null,
    msg.seed
  );
  return {
    id,
    ok: true,
    val_accuracy: result.val_accuracy,
    val_loss: result.val_loss,
    wall_seconds: result.wall_seconds,
    param_count: result.param_count,
    diagnostics: result.diagnostics,
  };
}

function handleParamCount(id: number, msg: Record<string, unknown>): Response {
  const doc = parseDocument(msg.architecture);
  return { id, ok: true, param_count: paramCount(doc) };
}

/** Process one request line. Returns null for blank lines. */
export async function handleLine(line: string): Promise<Response | null> {
  const trimmed = line.trim();
  if (!trimmed) return null;

  let msg: Record<string, unknown>;
  try {
    const parsed = JSON.parse(trimmed);
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      return fail(null, "request must be a JSON object");
    }
    msg = parsed;
  } catch (e) {
    return fail(null, `parse error: ${(e as Error).message}`);
  }

  const id = Number.isInteger(msg.id) ? (msg.id as number) : null;
  if (id === null) {
    return fail(null, "request is missing an integer id");
  }
  try {
    switch (msg.op) {
      case "evaluate":
        return await handleEvaluate(id, msg);
      case "param_count":
        return handleParamCount(id, msg);
      default:
        return fail(id, `unknown op ${JSON.stringify(msg.op)}`);
    }
  } catch (e) {
    return fail(id, (e as Error).message || String(e));
  }
}
