/* tslint:disable */
/* eslint-disable */

export class FrequencySplit {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Low-pass image.
     */
    low(): Uint8Array;
    /**
     * Where the attack is allowed to write, per color channel.
     */
    mask(): Uint8Array;
    /**
     * Residual shifted by +128 so that zero is mid-gray.
     */
    residual(): Uint8Array;
    readonly density: number;
}

export class Protection {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    image(): Uint8Array;
    loss_trace(): Float64Array;
    readonly acdm: number;
    readonly density: number;
    readonly linf: number;
    /**
     * `NaN` when the image is smaller than the SSIM window.
     */
    readonly ssimc: number;
}

/**
 * Raw bar heights in, distances out; the bars are normalized first.
 */
export function histogram_distances(p: Float64Array, q: Float64Array): Float64Array;

/**
 * Protects the image with a seeded small encoder.
 */
export function protect(rgba: Uint8Array, width: number, height: number, k: number, epsilon: number, alpha: number, iterations: number, seed: number): Protection;

export function split_frequency(rgba: Uint8Array, width: number, height: number, k: number): FrequencySplit;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_frequencysplit_free: (a: number, b: number) => void;
    readonly __wbg_protection_free: (a: number, b: number) => void;
    readonly frequencysplit_density: (a: number) => number;
    readonly frequencysplit_low: (a: number) => [number, number];
    readonly frequencysplit_mask: (a: number) => [number, number];
    readonly frequencysplit_residual: (a: number) => [number, number];
    readonly histogram_distances: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly protect: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly protection_density: (a: number) => number;
    readonly protection_image: (a: number) => [number, number];
    readonly protection_linf: (a: number) => number;
    readonly protection_loss_trace: (a: number) => [number, number];
    readonly protection_ssimc: (a: number) => number;
    readonly split_frequency: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly protection_acdm: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
