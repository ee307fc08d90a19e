/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_alignview_free: (a: number, b: number) => void;
export const __wbg_planview_free: (a: number, b: number) => void;
export const __wbg_quantizeview_free: (a: number, b: number) => void;
export const alignRotation: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const alignview_map: (a: number) => [number, number];
export const alignview_mapped: (a: number) => [number, number];
export const alignview_matched: (a: number) => number;
export const alignview_plantedDegrees: (a: number) => number;
export const alignview_recoveredDegrees: (a: number) => number;
export const alignview_reflection: (a: number) => number;
export const alignview_source: (a: number) => [number, number];
export const alignview_target: (a: number) => [number, number];
export const planview_cols: (a: number) => number;
export const planview_converged: (a: number) => number;
export const planview_entropicCost: (a: number) => number;
export const planview_exactCost: (a: number) => number;
export const planview_iterations: (a: number) => number;
export const planview_plan: (a: number) => [number, number];
export const planview_rows: (a: number) => number;
export const planview_source: (a: number) => [number, number];
export const planview_target: (a: number) => [number, number];
export const quantizeCloud: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const quantizeview_centers: (a: number) => [number, number];
export const quantizeview_cost: (a: number) => number;
export const quantizeview_points: (a: number) => [number, number];
export const quantizeview_weights: (a: number) => [number, number];
export const transportPlan: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
