/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_estimaterun_free: (a: number, b: number) => void;
export const __wbg_get_estimaterun_estimate: (a: number) => [number, number];
export const __wbg_get_estimaterun_grid: (a: number) => [number, number];
export const __wbg_get_estimaterun_imse: (a: number) => number;
export const __wbg_get_estimaterun_truth: (a: number) => [number, number];
export const __wbg_get_ratesummary_d_star: (a: number) => number;
export const __wbg_get_ratesummary_regime: (a: number) => [number, number];
export const __wbg_get_ratesummary_risk: (a: number) => number;
export const __wbg_ratesummary_free: (a: number, b: number) => void;
export const __wbg_set_estimaterun_estimate: (a: number, b: number, c: number) => void;
export const __wbg_set_estimaterun_grid: (a: number, b: number, c: number) => void;
export const __wbg_set_estimaterun_imse: (a: number, b: number) => void;
export const __wbg_set_estimaterun_truth: (a: number, b: number, c: number) => void;
export const __wbg_set_ratesummary_d_star: (a: number, b: number) => void;
export const __wbg_set_ratesummary_regime: (a: number, b: number, c: number) => void;
export const __wbg_set_ratesummary_risk: (a: number, b: number) => void;
export const estimateRun: (a: number, b: number, c: number, d: number, e: number, f: bigint, g: number) => [number, number, number];
export const rateSummary: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const waveletSamples: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
