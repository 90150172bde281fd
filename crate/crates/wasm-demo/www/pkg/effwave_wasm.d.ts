/* tslint:disable */
/* eslint-disable */

/**
 * Bloch bands of `-(d/dy + 2 pi i theta) sigma (d/dy + 2 pi i theta) + c`
 * with `sigma = 1 + sigma_amplitude cos(2 pi y)` and
 * `c = c_amplitude cos(2 pi y)`.
 */
export function band_structure_json(sigma_amplitude: number, c_amplitude: number, k_max: number, n_points: number, n_bands: number): string;

/**
 * Homogenized constants at the bottom of band 1, with the Bloch density
 * profile for display.
 */
export function effective_model_json(sigma_amplitude: number, c_amplitude: number, k_max: number): string;

/**
 * One shared-path factorization run at `eps = 1/cells`: the fast field, the
 * carrier-times-envelope product, the error history and the mass law.
 */
export function factorization_demo_json(sigma_amplitude: number, c_amplitude: number, cells: number, noise_kind: string, g_amplitude: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly band_structure_json: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly effective_model_json: (a: number, b: number, c: number) => [number, number];
    readonly factorization_demo_json: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
