/** End-to-end feature extraction: image file -> preprocess -> backbone ->
 * SRFG on disk. The same transform runs for reference and query images.
 */

import { FEATURE_DIM, GRID_SIZE } from './constants.js';
import type { Backbone } from './backbone.js';
import { readImage } from './image.js';
import { preprocess } from './preprocess.js';
import { writeSrfg } from './srfg.js';

export function extractToFile(imagePath: string, outPath: string, backbone: Backbone): void {
    const image = readImage(imagePath);
    const pre = preprocess(image);
    const features = backbone.extract(pre);
    const expected = GRID_SIZE * GRID_SIZE * FEATURE_DIM;
    if (features.length !== expected) {
        throw new Error(`backbone produced ${features.length} values, expected ${expected}`);
    }
    writeSrfg(
        { gridH: GRID_SIZE, gridW: GRID_SIZE, dim: FEATURE_DIM, normalized: true, data: features },
        outPath
    );
}
