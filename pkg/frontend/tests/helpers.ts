import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

/** Small deterministic PRNG so payloads are reproducible across runs. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Serialize a float grid: magic GRD1, u8 ndim, u32 LE dims, f32 LE data. */
export function grd1(dims: number[], values: ArrayLike<number>): Uint8Array {
  const count = dims.reduce((a, b) => a * b, 1);
  if (values.length !== count) {
    throw new Error(`expected ${count} values, got ${values.length}`);
  }
  const bytes = new Uint8Array(4 + 1 + 4 * dims.length + 4 * count);
  const view = new DataView(bytes.buffer);
  bytes.set([0x47, 0x52, 0x44, 0x31], 0);
  view.setUint8(4, dims.length);
  let off = 5;
  for (const dim of dims) {
    view.setUint32(off, dim, true);
    off += 4;
  }
  for (let i = 0; i < count; i++) {
    view.setFloat32(off, values[i]!, true);
    off += 4;
  }
  return bytes;
}

export function noiseGrid(rand: () => number, dims: number[] = [64, 64]): Uint8Array {
  const count = dims.reduce((a, b) => a * b, 1);
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) values[i] = rand();
  return grd1(dims, values);
}

/** Minimal canonical WAV: PCM16 mono at 16 kHz. */
export function wavBytes(rand: () => number, n = 1600): Uint8Array {
  const dataSize = n * 2;
  const bytes = new Uint8Array(44 + dataSize);
  const view = new DataView(bytes.buffer);
  const ascii = (offset: number, text: string) => {
    for (let i = 0; i < text.length; i++) bytes[offset + i] = text.charCodeAt(i);
  };
  ascii(0, "RIFF");
  view.setUint32(4, 36 + dataSize, true);
  ascii(8, "WAVE");
  ascii(12, "fmt ");
  view.setUint32(16, 16, true);
  view.setUint16(20, 1, true); // PCM
  view.setUint16(22, 1, true); // mono
  view.setUint32(24, 16000, true);
  view.setUint32(28, 32000, true); // byte rate
  view.setUint16(32, 2, true); // block align
  view.setUint16(34, 16, true);
  ascii(36, "data");
  view.setUint32(40, dataSize, true);
  for (let i = 0; i < n; i++) {
    view.setInt16(44 + i * 2, Math.round((rand() - 0.5) * 32767), true);
  }
  return bytes;
}

export interface LiveServer {
  baseUrl: string;
  adminPassword: string;
  stop(): Promise<void>;
}

/**
 * Boot the real Python HTTP service in a scratch workspace and wait until
 * it answers. The dashboard's acceptance checks run against this, not a
 * mock, so role gating and conflict handling are tested end to end.
 */
export async function startServer(): Promise<LiveServer> {
  const workdir = mkdtempSync(join(tmpdir(), "evidentia-live-"));
  const repoRoot = fileURLToPath(new URL("../..", import.meta.url));
  const adminPassword = "admin-pw";
  const port = 8300 + (process.pid % 500);
  const configPath = join(workdir, "config.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      data_dir: join(workdir, "data"),
      host: "127.0.0.1",
      port,
      token_key: "0123456789abcdef0123456789abcdef",
      admin_password: adminPassword,
      fingerprint_fit_per_class: 0,
    }),
  );
  const child: ChildProcess = spawn(
    "python3",
    ["-m", "evidentia.cli", "serve", "--config", configPath],
    {
      env: { ...process.env, PYTHONPATH: join(repoRoot, "src") },
      stdio: ["ignore", "pipe", "pipe"],
    },
  );
  let stderr = "";
  child.stderr?.on("data", (chunk) => (stderr += chunk));

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 90_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`server exited early (code ${child.exitCode}): ${stderr}`);
    }
    try {
      const probe = await fetch(`${baseUrl}/auth/login`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ username: "admin", password: adminPassword }),
      });
      if (probe.status < 500) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error(`server did not come up within 90s: ${stderr}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }

  return {
    baseUrl,
    adminPassword,
    stop: () =>
      new Promise<void>((resolve) => {
        child.once("exit", () => {
          rmSync(workdir, { recursive: true, force: true });
          resolve();
        });
        child.kill("SIGTERM");
        setTimeout(() => child.kill("SIGKILL"), 5000).unref();
      }),
  };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
