/* tslint:disable */
/* eslint-disable */

/**
 * 24 x days matrix of `metric` ("counts", "temperature", "humidity") for a
 * synthetic fleet, plus the hourly profile.
 */
export function circadian_heatmap(seed: number, n_devices: number, days: number, metric: string): string;

/**
 * One second of synthetic wingbeat at `f0` Hz, analysed for PSD,
 * fundamental and sex.
 */
export function wingbeat_analysis(f0: number, noise: number, seed: number): string;

/**
 * Ten seconds of bore vibration with `click_rate` clicks per second, with
 * the detected impulses, the verdict and a peak envelope for plotting.
 */
export function woodbore_analysis(click_rate: number, noise: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly circadian_heatmap: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly wingbeat_analysis: (a: number, b: number, c: number) => [number, number, number, number];
    readonly woodbore_analysis: (a: number, b: number, c: number) => [number, number, number, number];
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
