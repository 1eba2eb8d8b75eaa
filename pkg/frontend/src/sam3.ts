/** Stateful segmenter session: image and text embeddings plus an optional
 * geometric point buffer accumulate into one shared state, then a single
 * grounding pass decodes the mask.
 *
 * Payloads with validated points take the joint path (text and points
 * registered together before the one decoder call); degraded payloads
 * trigger text-only grounding from a fresh empty state. Session failures
 * propagate; a mask is never fabricated.
 */

import { GrayImage, RgbImage } from './image.js';
import type { GroundingPayload } from './payload.js';

export class SessionError extends Error {}

export interface SessionState {
    readonly id: number;
}

export interface MaskResult {
    width: number;
    height: number;
    /** Row-major, nonzero = foreground. */
    data: Uint8Array;
}

export interface UpdateParts {
    image?: unknown;
    text?: unknown;
    /** Flattened [n, 1, 2] coordinate tensor, unit-square values. */
    points?: Float32Array;
    /** Flattened [n, 1] label tensor, all ones. */
    labels?: Float32Array;
}

export interface SegmenterSession {
    encodeImage(image: RgbImage): Promise<unknown>;
    encodeText(prompt: string): Promise<unknown>;
    freshState(): SessionState;
    update(state: SessionState, parts: UpdateParts): Promise<SessionState>;
    ground(state: SessionState): Promise<MaskResult>;
}

export function pointTensors(payload: GroundingPayload): { points: Float32Array; labels: Float32Array } {
    const n = payload.points.length;
    const points = new Float32Array(n * 2);
    const labels = new Float32Array(n);
    payload.points.forEach((p, m) => {
        points[2 * m] = Math.fround(p.x_norm);
        points[2 * m + 1] = Math.fround(p.y_norm);
        labels[m] = 1;
    });
    return { points, labels };
}

export async function groundWithPayload(
    session: SegmenterSession, payload: GroundingPayload, image: RgbImage
): Promise<MaskResult> {
    const imageEmbedding = await session.encodeImage(image);
    const textEmbedding = await session.encodeText(payload.text_prompt);
    let state: SessionState;
    if (payload.degraded_to_text_only || payload.points.length === 0) {
        state = await session.update(session.freshState(), {
            image: imageEmbedding,
            text: textEmbedding,
        });
    } else {
        const { points, labels } = pointTensors(payload);
        state = await session.update(session.freshState(), {
            image: imageEmbedding,
            text: textEmbedding,
            points,
            labels,
        });
    }
    const mask = await session.ground(state);
    return rasterizeToImageDims(mask, image.width, image.height);
}

/** Nearest-neighbour resample of the returned mask to the original dims. */
export function rasterizeToImageDims(mask: MaskResult, width: number, height: number): MaskResult {
    if (mask.width === width && mask.height === height) {
        const data = new Uint8Array(mask.data.length);
        for (let i = 0; i < data.length; i++) data[i] = mask.data[i] !== 0 ? 1 : 0;
        return { width, height, data };
    }
    const out = new Uint8Array(width * height);
    for (let y = 0; y < height; y++) {
        const sy = Math.min(Math.floor(((y + 0.5) * mask.height) / height), mask.height - 1);
        for (let x = 0; x < width; x++) {
            const sx = Math.min(Math.floor(((x + 0.5) * mask.width) / width), mask.width - 1);
            out[y * width + x] = mask.data[sy * mask.width + sx] !== 0 ? 1 : 0;
        }
    }
    return { width, height, data: out };
}

export function maskToGray(mask: MaskResult): GrayImage {
    return { width: mask.width, height: mask.height, data: mask.data };
}

/** HTTP bridge to a running segmenter service (set SAM3_ENDPOINT). The
 * service owns the checkpoints; this client only sequences the calls.
 */
export class HttpSession implements SegmenterSession {
    private nextId = 1;

    constructor(private readonly endpoint: string) {
        if (!endpoint) throw new SessionError('no segmenter endpoint configured');
    }

    private async post(path: string, body: unknown): Promise<any> {
        let response: Response;
        try {
            response = await fetch(`${this.endpoint}${path}`, {
                method: 'POST',
                headers: { 'content-type': 'application/json' },
                body: JSON.stringify(body),
            });
        } catch (err) {
            throw new SessionError(`segmenter unreachable: ${(err as Error).message}`);
        }
        if (!response.ok) {
            throw new SessionError(`segmenter returned ${response.status} for ${path}`);
        }
        return response.json();
    }

    async encodeImage(image: RgbImage): Promise<unknown> {
        const body = {
            width: image.width,
            height: image.height,
            rgb_base64: Buffer.from(image.data).toString('base64'),
        };
        return (await this.post('/encode_image', body)).embedding;
    }

    async encodeText(prompt: string): Promise<unknown> {
        return (await this.post('/encode_text', { prompt })).embedding;
    }

    freshState(): SessionState {
        return { id: this.nextId++ };
    }

    async update(state: SessionState, parts: UpdateParts): Promise<SessionState> {
        await this.post('/update', {
            state: state.id,
            image: parts.image ?? null,
            text: parts.text ?? null,
            points: parts.points ? Array.from(parts.points) : null,
            labels: parts.labels ? Array.from(parts.labels) : null,
        });
        return state;
    }

    async ground(state: SessionState): Promise<MaskResult> {
        const result = await this.post('/ground', { state: state.id });
        const data = Buffer.from(result.mask_base64, 'base64');
        if (data.length !== result.width * result.height) {
            throw new SessionError('segmenter returned a malformed mask');
        }
        return { width: result.width, height: result.height, data: new Uint8Array(data) };
    }
}
