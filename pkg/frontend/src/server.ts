/**
 * Embedding sidecar HTTP server.
 *
 * Wire protocol (shared with the Python client):
 *   POST /embed  {"op": "embed_text" | "embed_image", "payload": string}
 *                -> {"vector": [number, ...]}
 *   GET  /info   -> {"dimension": number, "model": string}
 *
 * Malformed JSON or an invalid request shape yields 400 with an error
 * body; payloads over 4 MiB yield 413. Handling is stateless, so
 * concurrent requests are safe.
 */

import * as http from "node:http";
import { STUB_DIMENSION, STUB_MODEL_ID, stubVector } from "./stub";

export const MAX_PAYLOAD_BYTES = 4 * 1024 * 1024;

export interface EmbedBackend {
  readonly dimension: number;
  readonly modelId: string;
  embed(op: "embed_text" | "embed_image", payload: string): number[];
}

export function stubBackend(dim: number = STUB_DIMENSION): EmbedBackend {
  return {
    dimension: dim,
    modelId: STUB_MODEL_ID,
    embed: (op, payload) => stubVector(op, payload, dim),
  };
}

function sendJson(
  res: http.ServerResponse,
  status: number,
  body: unknown,
): void {
  const text = JSON.stringify(body);
  res.writeHead(status, {
    "Content-Type": "application/json",
    "Content-Length": Buffer.byteLength(text),
  });
  res.end(text);
}

function parseEmbedRequest(
  raw: string,
): { op: "embed_text" | "embed_image"; payload: string } {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new Error("body is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("body must be a JSON object");
  }
  const { op, payload } = doc as { op?: unknown; payload?: unknown };
  if (op !== "embed_text" && op !== "embed_image") {
    throw new Error('op must be "embed_text" or "embed_image"');
  }
  if (typeof payload !== "string") {
    throw new Error("payload must be a string");
  }
  if (op === "embed_image" && !/^[A-Za-z0-9+/]*={0,2}$/.test(payload)) {
    throw new Error("embed_image payload must be base64");
  }
  return { op, payload };
}

export function createServer(backend: EmbedBackend): http.Server {
  return http.createServer((req, res) => {
    if (req.method === "GET" && req.url === "/info") {
      sendJson(res, 200, {
        dimension: backend.dimension,
        model: backend.modelId,
      });
      return;
    }
    if (req.method !== "POST" || req.url !== "/embed") {
      sendJson(res, 404, { error: "not found" });
      return;
    }
    const chunks: Buffer[] = [];
    let received = 0;
    let rejected = false;
    req.on("data", (chunk: Buffer) => {
      received += chunk.length;
      if (received > MAX_PAYLOAD_BYTES) {
        if (!rejected) {
          rejected = true;
          sendJson(res, 413, { error: "payload exceeds 4 MiB" });
          req.destroy();
        }
        return;
      }
      chunks.push(chunk);
    });
    req.on("end", () => {
      if (rejected) return;
      let parsed;
      try {
        parsed = parseEmbedRequest(Buffer.concat(chunks).toString("utf8"));
      } catch (err) {
        sendJson(res, 400, { error: (err as Error).message });
        return;
      }
      sendJson(res, 200, {
        vector: backend.embed(parsed.op, parsed.payload),
      });
    });
  });
}
