/** Deterministic preprocessing applied identically to reference and query
 * images: bicubic resize to 1536x1536 followed by ImageNet normalization.
 * Values are scaled to [0, 1] before the cubic convolution; the resampled
 * signal is not clamped, matching float tensor pipelines.
 */

import { IMAGENET_MEAN, IMAGENET_STD, INPUT_SIZE } from './constants.js';
import type { RgbImage } from './image.js';

export interface PreprocessedImage {
    size: number;
    /** CHW float32 layout, 3 * size * size values. */
    data: Float32Array;
}

/** Keys cubic convolution kernel with a = -0.5 (the common bicubic). */
function cubicWeight(t: number): number {
    const a = -0.5;
    const x = Math.abs(t);
    if (x <= 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
    if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
    return 0;
}

function clampIndex(i: number, n: number): number {
    return i < 0 ? 0 : i >= n ? n - 1 : i;
}

/** Separable bicubic resample of one channel (float64 accumulation). */
function resizeChannel(
    src: Float64Array, inW: number, inH: number, outW: number, outH: number
): Float64Array {
    // horizontal pass
    const mid = new Float64Array(outW * inH);
    const scaleX = inW / outW;
    for (let ox = 0; ox < outW; ox++) {
        const sx = (ox + 0.5) * scaleX - 0.5;
        const x0 = Math.floor(sx);
        const wx = [0, 0, 0, 0];
        for (let k = -1; k <= 2; k++) wx[k + 1] = cubicWeight(sx - (x0 + k));
        for (let y = 0; y < inH; y++) {
            let acc = 0;
            for (let k = -1; k <= 2; k++) {
                acc += wx[k + 1] * src[y * inW + clampIndex(x0 + k, inW)];
            }
            mid[y * outW + ox] = acc;
        }
    }
    // vertical pass
    const out = new Float64Array(outW * outH);
    const scaleY = inH / outH;
    for (let oy = 0; oy < outH; oy++) {
        const sy = (oy + 0.5) * scaleY - 0.5;
        const y0 = Math.floor(sy);
        const wy = [0, 0, 0, 0];
        for (let k = -1; k <= 2; k++) wy[k + 1] = cubicWeight(sy - (y0 + k));
        for (let ox = 0; ox < outW; ox++) {
            let acc = 0;
            for (let k = -1; k <= 2; k++) {
                acc += wy[k + 1] * mid[clampIndex(y0 + k, inH) * outW + ox];
            }
            out[oy * outW + ox] = acc;
        }
    }
    return out;
}

export function preprocess(image: RgbImage, size: number = INPUT_SIZE): PreprocessedImage {
    const { width, height, data } = image;
    const out = new Float32Array(3 * size * size);
    for (let c = 0; c < 3; c++) {
        const channel = new Float64Array(width * height);
        for (let i = 0; i < width * height; i++) channel[i] = data[3 * i + c] / 255.0;
        const resized = resizeChannel(channel, width, height, size, size);
        const mean = IMAGENET_MEAN[c];
        const std = IMAGENET_STD[c];
        const base = c * size * size;
        for (let i = 0; i < size * size; i++) {
            out[base + i] = (resized[i] - mean) / std;
        }
    }
    return { size, data: out };
}

/** Assert the hardcoded normalization constants and grid geometry. */
export function selfTest(): string[] {
    const failures: string[] = [];
    const expectMean = [0.485, 0.456, 0.406];
    const expectStd = [0.229, 0.224, 0.225];
    for (let c = 0; c < 3; c++) {
        if (IMAGENET_MEAN[c] !== expectMean[c]) failures.push(`mean[${c}] != ${expectMean[c]}`);
        if (IMAGENET_STD[c] !== expectStd[c]) failures.push(`std[${c}] != ${expectStd[c]}`);
    }
    if (INPUT_SIZE !== 1536) failures.push('input size != 1536');
    if (Math.floor(INPUT_SIZE / 16) !== 96) failures.push('grid size != 96');
    const one: RgbImage = { width: 2, height: 2, data: new Uint8Array(12).fill(255) };
    const pre = preprocess(one, 4);
    const want0 = (1.0 - 0.485) / 0.229;
    if (Math.abs(pre.data[0] - want0) > 1e-6) {
        failures.push(`constant-image normalization off: ${pre.data[0]} != ${want0}`);
    }
    return failures;
}
