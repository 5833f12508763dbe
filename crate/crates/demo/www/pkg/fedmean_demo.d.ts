/* tslint:disable */
/* eslint-disable */

export class EstimateRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    estimate: Float64Array;
    grid: Float64Array;
    imse: number;
    truth: Float64Array;
}

export class RateSummary {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    d_star: number;
    regime: string;
    risk: number;
}

export function estimateRun(design: string, n: number, m: number, epsilon: number, seed: bigint, stride: number): EstimateRun;

export function rateSummary(design: string, servers: number, n: number, m: number, epsilon: number, alpha: number): RateSummary;

export function waveletSamples(a: number, level: number, k: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_estimaterun_free: (a: number, b: number) => void;
    readonly __wbg_get_estimaterun_estimate: (a: number) => [number, number];
    readonly __wbg_get_estimaterun_grid: (a: number) => [number, number];
    readonly __wbg_get_estimaterun_imse: (a: number) => number;
    readonly __wbg_get_estimaterun_truth: (a: number) => [number, number];
    readonly __wbg_get_ratesummary_d_star: (a: number) => number;
    readonly __wbg_get_ratesummary_regime: (a: number) => [number, number];
    readonly __wbg_get_ratesummary_risk: (a: number) => number;
    readonly __wbg_ratesummary_free: (a: number, b: number) => void;
    readonly __wbg_set_estimaterun_estimate: (a: number, b: number, c: number) => void;
    readonly __wbg_set_estimaterun_grid: (a: number, b: number, c: number) => void;
    readonly __wbg_set_estimaterun_imse: (a: number, b: number) => void;
    readonly __wbg_set_estimaterun_truth: (a: number, b: number, c: number) => void;
    readonly __wbg_set_ratesummary_d_star: (a: number, b: number) => void;
    readonly __wbg_set_ratesummary_regime: (a: number, b: number, c: number) => void;
    readonly __wbg_set_ratesummary_risk: (a: number, b: number) => void;
    readonly estimateRun: (a: number, b: number, c: number, d: number, e: number, f: bigint, g: number) => [number, number, number];
    readonly rateSummary: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly waveletSamples: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
