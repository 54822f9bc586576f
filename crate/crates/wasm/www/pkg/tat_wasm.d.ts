/* tslint:disable */
/* eslint-disable */

/**
 * Exact attention matrix next to its low-rank approximation.
 */
export function attention_heatmap(n: number, d: number, bound: number, seed: number, eps: number): string;

/**
 * Exact and fast gradients for the same random instance.
 */
export function compare_gradients(n: number, d: number, bound: number, seed: number, eps: number): string;

/**
 * `f(λ)` and `f'(λ)` on an even grid of `[0, 1]` for a random hard instance.
 */
export function probe_curve(n: number, d: number, ba: number, seed: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly attention_heatmap: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly compare_gradients: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly probe_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
