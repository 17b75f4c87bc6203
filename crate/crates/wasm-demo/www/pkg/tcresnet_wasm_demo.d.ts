/* tslint:disable */
/* eslint-disable */

/**
 * MFCC heatmap JSON of a synthesized clip.
 */
export function mfcc_heatmap(kind: string, freq_hz: number, seed: number): string;

/**
 * MFCC heatmap JSON of caller-provided 16 kHz samples (padded or trimmed to one second).
 */
export function mfcc_of_samples(samples: Float32Array): string;

/**
 * Per-layer parameters and FLOPs for a model name such as `tc-resnet8`.
 */
export function model_cost(model: string): string;

/**
 * Temporal receptive field after each convolution on the longest path.
 */
export function receptive_field(model: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly mfcc_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly mfcc_of_samples: (a: number, b: number) => [number, number, number, number];
    readonly model_cost: (a: number, b: number) => [number, number, number, number];
    readonly receptive_field: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
