/** Preprocessing and grid constants shared by every extraction path. */

export const INPUT_SIZE = 1536;
export const PATCH_SIZE = 16;
export const GRID_SIZE = Math.floor(INPUT_SIZE / PATCH_SIZE); // 96
export const FEATURE_DIM = 1024;

/** Per-channel ImageNet normalization constants. */
export const IMAGENET_MEAN: readonly [number, number, number] = [0.485, 0.456, 0.406];
export const IMAGENET_STD: readonly [number, number, number] = [0.229, 0.224, 0.225];
