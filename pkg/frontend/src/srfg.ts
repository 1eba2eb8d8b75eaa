/** SRFG feature-grid container: 4-byte magic, u32 version, u32 grid_h,
 * grid_w, dim and normalized flag, then row-major float32 patch vectors.
 * All fields little-endian; matches the consuming pipeline byte for byte.
 */

import { readFileSync, writeFileSync } from 'node:fs';
import { endianness } from 'node:os';

const MAGIC = 'SRFG';
const VERSION = 1;
const HEADER_BYTES = 24;
const HOST_LE = endianness() === 'LE';

export interface FeatureGridFile {
    gridH: number;
    gridW: number;
    dim: number;
    normalized: boolean;
    data: Float32Array;
}

export function writeSrfg(grid: FeatureGridFile, path: string): void {
    const n = grid.gridH * grid.gridW * grid.dim;
    if (grid.data.length !== n) {
        throw new Error(`data length ${grid.data.length} != ${n}`);
    }
    const buf = Buffer.alloc(HEADER_BYTES + 4 * n);
    buf.write(MAGIC, 0, 'ascii');
    buf.writeUInt32LE(VERSION, 4);
    buf.writeUInt32LE(grid.gridH, 8);
    buf.writeUInt32LE(grid.gridW, 12);
    buf.writeUInt32LE(grid.dim, 16);
    buf.writeUInt32LE(grid.normalized ? 1 : 0, 20);
    if (HOST_LE) {
        buf.set(
            new Uint8Array(grid.data.buffer, grid.data.byteOffset, 4 * n),
            HEADER_BYTES
        );
    } else {
        for (let i = 0; i < n; i++) buf.writeFloatLE(grid.data[i], HEADER_BYTES + 4 * i);
    }
    writeFileSync(path, buf);
}

export function readSrfg(path: string): FeatureGridFile {
    const buf = readFileSync(path);
    if (buf.length < HEADER_BYTES) throw new Error('truncated SRFG header');
    if (buf.toString('ascii', 0, 4) !== MAGIC) throw new Error('bad SRFG magic');
    const version = buf.readUInt32LE(4);
    if (version !== VERSION) throw new Error(`unsupported SRFG version ${version}`);
    const gridH = buf.readUInt32LE(8);
    const gridW = buf.readUInt32LE(12);
    const dim = buf.readUInt32LE(16);
    const flag = buf.readUInt32LE(20);
    const n = gridH * gridW * dim;
    if (buf.length < HEADER_BYTES + 4 * n) throw new Error('truncated SRFG payload');
    if (buf.length > HEADER_BYTES + 4 * n) throw new Error('trailing bytes in SRFG');
    let data: Float32Array;
    if (HOST_LE) {
        // copy into a fresh, 4-aligned buffer before viewing as float32
        const bytes = new Uint8Array(4 * n);
        bytes.set(buf.subarray(HEADER_BYTES, HEADER_BYTES + 4 * n));
        data = new Float32Array(bytes.buffer);
    } else {
        data = new Float32Array(n);
        for (let i = 0; i < n; i++) data[i] = buf.readFloatLE(HEADER_BYTES + 4 * i);
    }
    if (flag === 1) {
        for (let p = 0; p < gridH * gridW; p++) {
            let acc = 0;
            for (let t = 0; t < dim; t++) acc += data[p * dim + t] * data[p * dim + t];
            if (Math.abs(Math.sqrt(acc) - 1.0) > 1e-4) {
                throw new Error(`patch ${p} norm deviates from 1.0`);
            }
        }
    }
    return { gridH, gridW, dim, normalized: flag === 1, data };
}
