/** Minimal image I/O: binary PPM (P6) for RGB input, binary PGM (P5) for
 * masks. The PGM writer emits the canonical form the downstream pipeline
 * reads back byte-identically (maxval 255, foreground 255).
 */

import { readFileSync, writeFileSync } from 'node:fs';

export interface RgbImage {
    width: number;
    height: number;
    /** Interleaved RGB, 3 bytes per pixel. */
    data: Uint8Array;
}

export interface GrayImage {
    width: number;
    height: number;
    data: Uint8Array;
}

/** Parse `count` ASCII integers after a two-byte magic, skipping `#` comments. */
function parseHeaderInts(buf: Uint8Array, count: number): { values: number[]; offset: number } {
    const values: number[] = [];
    let pos = 2;
    let current = '';
    while (values.length < count) {
        if (pos >= buf.length) throw new Error('header ended before raster data');
        const ch = buf[pos];
        if (ch === 0x23) { // '#'
            while (pos < buf.length && buf[pos] !== 0x0a) pos++;
            continue;
        }
        if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
            if (current) { values.push(parseInt(current, 10)); current = ''; }
            pos++;
            continue;
        }
        if (ch < 0x30 || ch > 0x39) throw new Error(`unexpected byte ${ch} in header`);
        current += String.fromCharCode(ch);
        pos++;
    }
    return { values, offset: pos };
}

export function decodePpm(buf: Uint8Array): RgbImage {
    if (buf.length < 2 || buf[0] !== 0x50 || buf[1] !== 0x36) {
        throw new Error("expected PPM magic 'P6'");
    }
    const { values: [width, height, maxval], offset } = parseHeaderInts(buf, 3);
    if (width < 1 || height < 1) throw new Error(`invalid PPM dims ${width}x${height}`);
    if (maxval > 255) throw new Error('16-bit PPM not supported');
    const n = width * height * 3;
    if (buf.length < offset + n) throw new Error('truncated PPM raster');
    return { width, height, data: buf.slice(offset, offset + n) };
}

export function decodePgm(buf: Uint8Array): GrayImage {
    if (buf.length < 2 || buf[0] !== 0x50 || buf[1] !== 0x35) {
        throw new Error("expected PGM magic 'P5'");
    }
    const { values: [width, height, maxval], offset } = parseHeaderInts(buf, 3);
    if (width < 1 || height < 1) throw new Error(`invalid PGM dims ${width}x${height}`);
    if (maxval > 255) throw new Error('16-bit PGM not supported');
    const n = width * height;
    if (buf.length < offset + n) throw new Error('truncated PGM raster');
    return { width, height, data: buf.slice(offset, offset + n) };
}

/** Read an RGB image; grayscale PGM inputs are replicated across channels. */
export function readImage(path: string): RgbImage {
    const buf = new Uint8Array(readFileSync(path));
    if (buf.length >= 2 && buf[0] === 0x50 && buf[1] === 0x36) return decodePpm(buf);
    if (buf.length >= 2 && buf[0] === 0x50 && buf[1] === 0x35) {
        const gray = decodePgm(buf);
        const rgb = new Uint8Array(gray.width * gray.height * 3);
        for (let i = 0; i < gray.data.length; i++) {
            rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = gray.data[i];
        }
        return { width: gray.width, height: gray.height, data: rgb };
    }
    throw new Error(`unsupported image format in ${path} (expected P6 PPM or P5 PGM)`);
}

export function writePpm(image: RgbImage, path: string): void {
    const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, 'ascii');
    writeFileSync(path, Buffer.concat([header, Buffer.from(image.data)]));
}

/** Write a binary mask in the pipeline's canonical PGM form. */
export function writeMaskPgm(mask: GrayImage, path: string): void {
    const header = Buffer.from(`P5\n${mask.width} ${mask.height}\n255\n`, 'ascii');
    const raster = Buffer.alloc(mask.width * mask.height);
    for (let i = 0; i < raster.length; i++) raster[i] = mask.data[i] !== 0 ? 255 : 0;
    writeFileSync(path, Buffer.concat([header, raster]));
}
