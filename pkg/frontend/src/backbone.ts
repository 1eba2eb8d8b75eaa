/** Patch-feature backbones behind a common interface.
 *
 * The command bridge streams the preprocessed tensor to an external model
 * process (set BACKBONE_CMD); the stub projects each 16x16 patch through a
 * fixed seeded sparse map, giving deterministic, correctly shaped,
 * retrieval-meaningful features for integration tests and dry runs without
 * model weights.
 */

import { spawnSync } from 'node:child_process';

import { FEATURE_DIM, GRID_SIZE, PATCH_SIZE } from './constants.js';
import type { PreprocessedImage } from './preprocess.js';

export class BackboneError extends Error {}

export interface Backbone {
    readonly name: string;
    /** Returns GRID*GRID*DIM float32 values, unit-norm rows, patch-major. */
    extract(image: PreprocessedImage): Float32Array;
}

function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a |= 0;
        a = (a + 0x6d2b79f5) | 0;
        let t = Math.imul(a ^ (a >>> 15), 1 | a);
        t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

const TAPS = 8;

export class StubBackbone implements Backbone {
    readonly name = 'stub-sparse-projection';
    private readonly tapIndex: Int32Array;
    private readonly tapSign: Float32Array;

    constructor(seed = 0x5eed) {
        const rand = mulberry32(seed);
        const patchValues = 3 * PATCH_SIZE * PATCH_SIZE;
        this.tapIndex = new Int32Array(FEATURE_DIM * TAPS);
        this.tapSign = new Float32Array(FEATURE_DIM * TAPS);
        for (let i = 0; i < FEATURE_DIM * TAPS; i++) {
            this.tapIndex[i] = Math.floor(rand() * patchValues);
            this.tapSign[i] = rand() < 0.5 ? -1 : 1;
        }
    }

    extract(image: PreprocessedImage): Float32Array {
        const size = image.size;
        const grid = Math.floor(size / PATCH_SIZE);
        const out = new Float32Array(grid * grid * FEATURE_DIM);
        const patchVec = new Float64Array(3 * PATCH_SIZE * PATCH_SIZE);
        for (let pi = 0; pi < grid; pi++) {
            for (let pj = 0; pj < grid; pj++) {
                let v = 0;
                for (let c = 0; c < 3; c++) {
                    const base = c * size * size;
                    for (let di = 0; di < PATCH_SIZE; di++) {
                        const row = base + (pi * PATCH_SIZE + di) * size + pj * PATCH_SIZE;
                        for (let dj = 0; dj < PATCH_SIZE; dj++) {
                            patchVec[v++] = image.data[row + dj];
                        }
                    }
                }
                const feature = new Float64Array(FEATURE_DIM);
                let norm2 = 0;
                for (let k = 0; k < FEATURE_DIM; k++) {
                    let acc = 0;
                    const base = k * TAPS;
                    for (let t = 0; t < TAPS; t++) {
                        acc += this.tapSign[base + t] * patchVec[this.tapIndex[base + t]];
                    }
                    feature[k] = acc;
                    norm2 += acc * acc;
                }
                const outBase = (pi * grid + pj) * FEATURE_DIM;
                if (norm2 < 1e-24) {
                    out[outBase] = 1.0; // degenerate constant patch
                } else {
                    const inv = 1.0 / Math.sqrt(norm2);
                    for (let k = 0; k < FEATURE_DIM; k++) {
                        out[outBase + k] = Math.fround(feature[k] * inv);
                    }
                }
            }
        }
        return out;
    }
}

/** Bridge to an external model process: the preprocessed CHW float32
 * tensor goes to stdin, GRID*GRID*DIM float32 features come back on
 * stdout. Any failure is a model-load failure; nothing is fabricated.
 */
export class CommandBackbone implements Backbone {
    readonly name: string;

    constructor(private readonly command: string) {
        this.name = `command(${command})`;
    }

    extract(image: PreprocessedImage): Float32Array {
        const input = Buffer.from(image.data.buffer, image.data.byteOffset, image.data.byteLength);
        const proc = spawnSync(this.command, {
            shell: true,
            input,
            maxBuffer: 1024 * 1024 * 1024,
        });
        if (proc.error) {
            throw new BackboneError(`backbone command failed to start: ${proc.error.message}`);
        }
        if (proc.status !== 0) {
            throw new BackboneError(
                `backbone command exited with ${proc.status}: ${proc.stderr?.toString() ?? ''}`
            );
        }
        const expected = GRID_SIZE * GRID_SIZE * FEATURE_DIM * 4;
        if (proc.stdout.length !== expected) {
            throw new BackboneError(
                `backbone returned ${proc.stdout.length} bytes, expected ${expected}`
            );
        }
        return new Float32Array(proc.stdout.buffer, proc.stdout.byteOffset, expected / 4);
    }
}

export function backboneFromEnv(env: NodeJS.ProcessEnv = process.env): Backbone {
    const cmd = env.BACKBONE_CMD;
    if (cmd && cmd.trim()) return new CommandBackbone(cmd);
    return new StubBackbone();
}
