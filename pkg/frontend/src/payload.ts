/** Reader for the grounding payload JSON produced by the pipeline. */

import { readFileSync } from 'node:fs';

export interface PayloadPoint {
    x_norm: number;
    y_norm: number;
    label: number;
    score: number;
}

export interface GroundingPayload {
    class_name: string;
    text_prompt: string;
    points: PayloadPoint[];
    image_w: number;
    image_h: number;
    degraded_to_text_only: boolean;
}

export function parsePayload(text: string): GroundingPayload {
    const obj = JSON.parse(text);
    for (const field of [
        'class_name', 'text_prompt', 'points', 'image_w', 'image_h',
        'degraded_to_text_only',
    ]) {
        if (!(field in obj)) throw new Error(`payload missing field ${field}`);
    }
    const points: PayloadPoint[] = obj.points;
    for (const p of points) {
        if (p.label !== 1) throw new Error('payload points must all carry label 1');
        if (p.x_norm < 0 || p.x_norm > 1 || p.y_norm < 0 || p.y_norm > 1) {
            throw new Error('payload point outside the unit square');
        }
    }
    for (let i = 1; i < points.length; i++) {
        if (points[i].score > points[i - 1].score) {
            throw new Error('payload points must be sorted by score descending');
        }
    }
    if (obj.degraded_to_text_only !== (points.length === 0)) {
        throw new Error('degraded_to_text_only must mirror an empty point list');
    }
    return obj as GroundingPayload;
}

export function readPayload(path: string): GroundingPayload {
    return parsePayload(readFileSync(path, 'utf-8'));
}
