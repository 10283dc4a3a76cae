// KTNS tensor files, matching the trainer's reader byte for byte:
// magic "KTNS", version 0x01, dtype byte (0 = f32), rank byte,
// rank u64 little-endian dims, then the row-major little-endian payload.

import * as fs from "fs";

const MAGIC = "KTNS";
const VERSION = 1;
const DTYPE_F32 = 0;

export interface KtnsTensor {
  dims: number[];
  data: Float32Array;
}

export function writeKtns(path: string, rows: Float64Array[], dim: number): void {
  const n = rows.length;
  const header = 4 + 3 + 2 * 8;
  const buf = Buffer.alloc(header + n * dim * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt8(VERSION, 4);
  buf.writeUInt8(DTYPE_F32, 5);
  buf.writeUInt8(2, 6); // rank: always L x E here
  buf.writeBigUInt64LE(BigInt(n), 7);
  buf.writeBigUInt64LE(BigInt(dim), 15);
  let off = header;
  for (const row of rows) {
    if (row.length !== dim) {
      throw new Error(`${path}: row has ${row.length} values, expected ${dim}`);
    }
    for (let c = 0; c < dim; c++) {
      buf.writeFloatLE(Math.fround(row[c]), off);
      off += 4;
    }
  }
  fs.writeFileSync(path, buf);
}

export function readKtns(path: string): KtnsTensor {
  const buf = fs.readFileSync(path);
  if (buf.length < 7) throw new Error(`${path}: truncated header`);
  if (buf.toString("ascii", 0, 4) !== MAGIC) throw new Error(`${path}: bad magic`);
  const version = buf.readUInt8(4);
  if (version !== VERSION) throw new Error(`${path}: unsupported version ${version}`);
  const dtype = buf.readUInt8(5);
  if (dtype !== DTYPE_F32) throw new Error(`${path}: unsupported dtype byte ${dtype}`);
  const rank = buf.readUInt8(6);
  if (buf.length < 7 + 8 * rank) throw new Error(`${path}: truncated dims`);
  const dims: number[] = [];
  let off = 7;
  let count = 1;
  for (let i = 0; i < rank; i++) {
    dims.push(Number(buf.readBigUInt64LE(off)));
    count *= dims[i];
    off += 8;
  }
  if (buf.length !== off + 4 * count) {
    throw new Error(`${path}: payload size ${buf.length - off} does not match dims [${dims}]`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(off + i * 4);
  return { dims, data };
}
