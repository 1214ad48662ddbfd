/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_frequencysplit_free: (a: number, b: number) => void;
export const __wbg_protection_free: (a: number, b: number) => void;
export const frequencysplit_density: (a: number) => number;
export const frequencysplit_low: (a: number) => [number, number];
export const frequencysplit_mask: (a: number) => [number, number];
export const frequencysplit_residual: (a: number) => [number, number];
export const histogram_distances: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const protect: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const protection_density: (a: number) => number;
export const protection_image: (a: number) => [number, number];
export const protection_linf: (a: number) => number;
export const protection_loss_trace: (a: number) => [number, number];
export const protection_ssimc: (a: number) => number;
export const split_frequency: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const protection_acdm: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
