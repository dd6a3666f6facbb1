/* tslint:disable */
/* eslint-disable */

/**
 * Interactive trajectory on a flat periodic channel of length `2π`.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances by `steps` time steps and returns the new `‖v‖_H`.
     */
    advance(steps: number): number;
    ball_radius(): number;
    h_norm(): number;
    constructor(k: number, m: number, nu: number, s: number, potential: string, n_mollify: number, radius: number, seed: number);
    time(): number;
    v_norm(): number;
    /**
     * Vorticity on an `nx × ny` grid, row-major from the bottom wall up.
     */
    vorticity(nx: number, ny: number): Float64Array;
    /**
     * Normal velocity on the slip wall at `nx` points.
     */
    wall_normal_velocity(nx: number): Float64Array;
}

/**
 * Samples of `j'`, the Clarke interval bounds and `jₙ'` on `[lo, hi]`,
 * packed as `[s, j', clarke_lo, clarke_hi, jn'] × points`.
 */
export function potential_curves(name: string, alpha: number, n: number, lo: number, hi: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_advance: (a: number, b: number) => number;
    readonly demo_ball_radius: (a: number) => number;
    readonly demo_h_norm: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly demo_time: (a: number) => number;
    readonly demo_v_norm: (a: number) => number;
    readonly demo_vorticity: (a: number, b: number, c: number) => [number, number];
    readonly demo_wall_normal_velocity: (a: number, b: number) => [number, number];
    readonly potential_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
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
