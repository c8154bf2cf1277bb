/* tslint:disable */
/* eslint-disable */

/**
 * Three-link arm reaching for a goal around a round obstacle.
 */
export class ArmDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Distance at which the barrier starts to act, measured from the obstacle surface.
     */
    barrier_margin(): number;
    configuration(): Float64Array;
    ee_velocities(): Float64Array;
    goal(): Float64Array;
    /**
     * `|grad Phi|` at the current configuration.
     */
    grad_norm(): number;
    /**
     * Base and link end points, `[x0, y0, x1, y1, ...]`.
     */
    joint_positions(): Float64Array;
    constructor();
    /**
     * `[x, y, radius]` of the obstacle.
     */
    obstacle(): Float64Array;
    /**
     * Total potential of the composed tree.
     */
    potential(): number;
    set_configuration(q: Float64Array): void;
    set_goal(x: number, y: number): void;
    set_obstacle(x: number, y: number, radius: number): void;
    step(steps: number, dt: number): void;
    time(): number;
}

/**
 * Random planar coupling-layer diffeomorphism.
 */
export class DiffeoDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Maps one point forward.
     */
    forward(x: number, y: number): Float64Array;
    /**
     * Maps one point back.
     */
    inverse(x: number, y: number): Float64Array;
    /**
     * Log-determinant of the Jacobian at one point.
     */
    log_det(x: number, y: number): number;
    constructor(seed: number, layers: number, features: number, weight_std: number);
    /**
     * Largest `|phi^-1(phi(x)) - x|` over a `samples x samples` grid.
     */
    roundtrip_error(samples: number, extent: number): number;
    /**
     * Images of `lines` horizontal and `lines` vertical grid lines over
     * `[-extent, extent]^2`, each sampled at `samples` points, as
     * consecutive `x, y` pairs.
     */
    warp_grid(lines: number, samples: number, extent: number): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_armdemo_free: (a: number, b: number) => void;
    readonly __wbg_diffeodemo_free: (a: number, b: number) => void;
    readonly armdemo_barrier_margin: (a: number) => number;
    readonly armdemo_configuration: (a: number) => [number, number];
    readonly armdemo_ee_velocities: (a: number) => [number, number, number, number];
    readonly armdemo_goal: (a: number) => [number, number];
    readonly armdemo_grad_norm: (a: number) => number;
    readonly armdemo_joint_positions: (a: number) => [number, number];
    readonly armdemo_new: () => [number, number, number];
    readonly armdemo_obstacle: (a: number) => [number, number];
    readonly armdemo_potential: (a: number) => number;
    readonly armdemo_set_configuration: (a: number, b: number, c: number) => [number, number];
    readonly armdemo_set_goal: (a: number, b: number, c: number) => [number, number];
    readonly armdemo_set_obstacle: (a: number, b: number, c: number, d: number) => [number, number];
    readonly armdemo_step: (a: number, b: number, c: number) => [number, number];
    readonly armdemo_time: (a: number) => number;
    readonly diffeodemo_forward: (a: number, b: number, c: number) => [number, number];
    readonly diffeodemo_inverse: (a: number, b: number, c: number) => [number, number];
    readonly diffeodemo_log_det: (a: number, b: number, c: number) => number;
    readonly diffeodemo_new: (a: number, b: number, c: number, d: number) => number;
    readonly diffeodemo_roundtrip_error: (a: number, b: number, c: number) => number;
    readonly diffeodemo_warp_grid: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
