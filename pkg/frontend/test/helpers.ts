/**
 * Test fixture: build a store with a planted four-query pattern through the
 * awm CLI, then serve it live for the UI tests.
 *
 * The planted workload repeats the guard pattern (users count, items, shops,
 * users update) separated by alternating bridge queries so mining emits the
 * four queries as one pattern once per block.
 */

import { execFile, spawn, type ChildProcess } from "node:child_process";
import { mkdtemp, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { promisify } from "node:util";

const execFileAsync = promisify(execFile);

export const GUARD_PATTERN_QUERIES = [
  "SELECT count(*) FROM users",
  "SELECT item FROM items",
  "SELECT shop FROM shops",
  "UPDATE users SET flag = 1 WHERE uid = 7",
];

const BRIDGE_A = "SELECT 1 FROM bridge_a";
const BRIDGE_B = "SELECT 1 FROM bridge_b";

function recordLine(sql: string, timestamp: number): string {
  return JSON.stringify({
    lock_wait_time: 0.0,
    logical_read: 10,
    rows_examined: 100,
    rows_returned: 5,
    rows_updated: sql.startsWith("UPDATE") ? 1 : 0,
    rt: 0.01,
    timestamp,
    physical_sync_read: 1,
    database: "shop_db",
    error_code: "0",
    origin_host: "10.0.0.1",
    sql_type: sql.split(" ", 1)[0],
    sql,
    group_label: "checkout",
  });
}

export function plantedWorkload(blocks = 6): string {
  const lines: string[] = [];
  let ts = 0;
  for (let i = 0; i < blocks; i++) {
    const bridges = i % 2 === 0 ? [BRIDGE_A, BRIDGE_B] : [BRIDGE_B, BRIDGE_A];
    for (const sql of [...GUARD_PATTERN_QUERIES, ...bridges]) {
      lines.push(recordLine(sql, ts++));
    }
  }
  return lines.join("\n") + "\n";
}

export interface LiveServer {
  baseUrl: string;
  storeDir: string;
  stop: () => Promise<void>;
}

export async function startLiveServer(): Promise<LiveServer> {
  const workDir = await mkdtemp(path.join(tmpdir(), "awm-ui-"));
  const storeDir = path.join(workDir, "store");
  const logPath = path.join(workDir, "records.jsonl");
  const confPath = path.join(workDir, "awm.conf");

  await writeFile(logPath, plantedWorkload());
  await writeFile(confPath, "dim = 16\nbatch_size = 64\ngroup_by = label\ntheta = 0.77\nmax_ord = 1\n");

  await execFileAsync("python3", ["-m", "awm.cli", "ingest", "--input", logPath, "--store", storeDir]);
  await execFileAsync("python3", ["-m", "awm.cli", "run", "--store", storeDir, "--config", confPath]);

  const child: ChildProcess = spawn(
    "python3",
    ["-u", "-m", "awm.cli", "serve", "--store", storeDir, "--port", "0"],
    { stdio: ["ignore", "pipe", "inherit"] },
  );

  const baseUrl = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server did not start")), 20_000);
    let buffered = "";
    child.stdout!.on("data", (chunk: Buffer) => {
      buffered += chunk.toString();
      const match = buffered.match(/http:\/\/[\d.]+:(\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[0]!);
      }
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early with code ${code}`));
    });
  });

  for (let attempt = 0; ; attempt++) {
    try {
      const response = await fetch(`${baseUrl}/health`);
      if (response.ok) break;
    } catch {
      if (attempt > 50) throw new Error("server never became healthy");
      await new Promise((r) => setTimeout(r, 100));
    }
  }

  return {
    baseUrl,
    storeDir,
    stop: () =>
      new Promise<void>((resolve) => {
        child.on("exit", () => resolve());
        child.kill("SIGINT");
        setTimeout(() => {
          child.kill("SIGKILL");
          resolve();
        }, 3000).unref();
      }),
  };
}
