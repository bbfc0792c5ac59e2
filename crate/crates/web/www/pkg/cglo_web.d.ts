/* tslint:disable */
/* eslint-disable */

/**
 * One optimizer run that the page advances an iteration at a time.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Incumbent `[x.., sample mean, true mean]`.
     */
    best(): Float64Array;
    /**
     * `[lower.., upper..]`.
     */
    bounds(): Float64Array;
    /**
     * Region centers, `dim` values per region.
     */
    centers(): Float64Array;
    consumed(): bigint;
    /**
     * One-dimensional profile on `n` grid points, rows
     * `[x, true mean, global mean, global sd, overall mean, overall sd]`.
     */
    curve(n: number): Float64Array;
    /**
     * Design points as rows `[x.., sample mean, reps, region]`.
     */
    design(): Float64Array;
    dim(): number;
    isDone(): boolean;
    iteration(): number;
    lastStep(): string;
    /**
     * `objective` is `paper1d` or `sun2d`.
     */
    constructor(objective_name: string, seed: bigint, budget: bigint);
    /**
     * Known optimum `[x.., value]`, empty when none is recorded.
     */
    optimum(): Float64Array;
    /**
     * Runs one iteration; `false` once the budget is spent.
     */
    step(): boolean;
    /**
     * Overall-model mean (or the true mean) on an `n` x `n` grid, row-major
     * with the second coordinate varying slowest.
     */
    surface(n: number, truth: boolean): Float64Array;
    total(): bigint;
}

/**
 * Random search on the same budget: `[x.., sample mean, true mean]`.
 */
export function randomSearch(objective_name: string, seed: bigint, budget: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_best: (a: number) => [number, number];
    readonly demo_bounds: (a: number) => [number, number];
    readonly demo_centers: (a: number) => [number, number];
    readonly demo_consumed: (a: number) => bigint;
    readonly demo_curve: (a: number, b: number) => [number, number, number, number];
    readonly demo_design: (a: number) => [number, number];
    readonly demo_dim: (a: number) => number;
    readonly demo_isDone: (a: number) => number;
    readonly demo_iteration: (a: number) => number;
    readonly demo_lastStep: (a: number) => [number, number];
    readonly demo_new: (a: number, b: number, c: bigint, d: bigint) => [number, number, number];
    readonly demo_optimum: (a: number) => [number, number];
    readonly demo_step: (a: number) => [number, number, number];
    readonly demo_surface: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_total: (a: number) => bigint;
    readonly randomSearch: (a: number, b: number, c: bigint, d: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
