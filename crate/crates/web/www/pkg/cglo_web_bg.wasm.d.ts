/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_best: (a: number) => [number, number];
export const demo_bounds: (a: number) => [number, number];
export const demo_centers: (a: number) => [number, number];
export const demo_consumed: (a: number) => bigint;
export const demo_curve: (a: number, b: number) => [number, number, number, number];
export const demo_design: (a: number) => [number, number];
export const demo_dim: (a: number) => number;
export const demo_isDone: (a: number) => number;
export const demo_iteration: (a: number) => number;
export const demo_lastStep: (a: number) => [number, number];
export const demo_new: (a: number, b: number, c: bigint, d: bigint) => [number, number, number];
export const demo_optimum: (a: number) => [number, number];
export const demo_step: (a: number) => [number, number, number];
export const demo_surface: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_total: (a: number) => bigint;
export const randomSearch: (a: number, b: number, c: bigint, d: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
