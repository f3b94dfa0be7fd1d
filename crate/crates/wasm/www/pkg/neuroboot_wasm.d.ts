/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Draws `l` sub-averages of `k` trials and returns a flat
     * `[int_share, type1 curve.., type2 curve..]` vector: the share of
     * draws that came from Int trials, then the channel-mean average of
     * the Type1 and of the Type2 sub-averages.
     */
    bootstrap(scheme_name: string, k: number, l: number, w_int: number, seed: bigint): Float64Array;
    /**
     * Mean cross-validated window accuracy for one scheme.
     */
    decode(scheme_name: string, k: number, l: number, w_int: number, seed: bigint): number;
    /**
     * Signal-window ΔERP of each topic, `[bio, int]`.
     */
    delta_erps(): Float64Array;
    /**
     * Channel-mean Type1 − Type2 ERP of one topic (`"Bio"` or `"Int"`).
     */
    erp_difference(topic: string): Float64Array;
    /**
     * Simulates and preprocesses one subject.
     */
    constructor(effect_bio: number, effect_int: number, noise_sd: number, trials_per_cell: number, seed: bigint);
    times(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_bootstrap: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly demo_decode: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly demo_delta_erps: (a: number) => [number, number, number, number];
    readonly demo_erp_difference: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly demo_times: (a: number) => [number, number];
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
