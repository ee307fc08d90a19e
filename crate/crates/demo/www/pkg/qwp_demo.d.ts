/* tslint:disable */
/* eslint-disable */

/**
 * Source, shuffled rotated target and the source mapped by the recovered map.
 */
export class AlignView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Recovered 2x2 map, row-major.
     */
    map(): Float64Array;
    mapped(): Float64Array;
    source(): Float64Array;
    target(): Float64Array;
    /**
     * Fraction of source points whose nearest mapped target is their planted partner.
     */
    readonly matched: number;
    readonly plantedDegrees: number;
    /**
     * Rotation angle of the recovered map (of its rotation part when it reflects).
     */
    readonly recoveredDegrees: number;
    readonly reflection: boolean;
}

/**
 * Entropic plan between two clouds with uniform weights. Points are stored
 * row-major as `x0, y0, x1, y1, ...` and the plan as `rows x cols` row-major.
 */
export class PlanView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    plan(): Float64Array;
    source(): Float64Array;
    target(): Float64Array;
    readonly cols: number;
    readonly converged: boolean;
    readonly entropicCost: number;
    /**
     * Unregularized optimum, or NaN when the instance exceeds the exact solver cap.
     */
    readonly exactCost: number;
    readonly iterations: number;
    readonly rows: number;
}

/**
 * Anchors summarizing a cloud, with their Voronoi weights.
 */
export class QuantizeView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    centers(): Float64Array;
    points(): Float64Array;
    weights(): Float64Array;
    /**
     * Mean squared distance from each point to its nearest anchor.
     */
    readonly cost: number;
}

export function alignRotation(n: number, degrees: number, noise: number, k: number, seed: bigint): AlignView;

export function quantizeCloud(n: number, k: number, kmeanspp: boolean, lloyd: boolean, seed: bigint): QuantizeView;

export function transportPlan(rows: number, cols: number, epsilon: number, seed: bigint): PlanView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_alignview_free: (a: number, b: number) => void;
    readonly __wbg_planview_free: (a: number, b: number) => void;
    readonly __wbg_quantizeview_free: (a: number, b: number) => void;
    readonly alignRotation: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly alignview_map: (a: number) => [number, number];
    readonly alignview_mapped: (a: number) => [number, number];
    readonly alignview_matched: (a: number) => number;
    readonly alignview_plantedDegrees: (a: number) => number;
    readonly alignview_recoveredDegrees: (a: number) => number;
    readonly alignview_reflection: (a: number) => number;
    readonly alignview_source: (a: number) => [number, number];
    readonly alignview_target: (a: number) => [number, number];
    readonly planview_cols: (a: number) => number;
    readonly planview_converged: (a: number) => number;
    readonly planview_entropicCost: (a: number) => number;
    readonly planview_exactCost: (a: number) => number;
    readonly planview_iterations: (a: number) => number;
    readonly planview_plan: (a: number) => [number, number];
    readonly planview_rows: (a: number) => number;
    readonly planview_source: (a: number) => [number, number];
    readonly planview_target: (a: number) => [number, number];
    readonly quantizeCloud: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly quantizeview_centers: (a: number) => [number, number];
    readonly quantizeview_cost: (a: number) => number;
    readonly quantizeview_points: (a: number) => [number, number];
    readonly quantizeview_weights: (a: number) => [number, number];
    readonly transportPlan: (a: number, b: number, c: number, d: bigint) => [number, number, number];
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
