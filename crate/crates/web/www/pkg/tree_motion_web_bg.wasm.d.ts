/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_armdemo_free: (a: number, b: number) => void;
export const __wbg_diffeodemo_free: (a: number, b: number) => void;
export const armdemo_barrier_margin: (a: number) => number;
export const armdemo_configuration: (a: number) => [number, number];
export const armdemo_ee_velocities: (a: number) => [number, number, number, number];
export const armdemo_goal: (a: number) => [number, number];
export const armdemo_grad_norm: (a: number) => number;
export const armdemo_joint_positions: (a: number) => [number, number];
export const armdemo_new: () => [number, number, number];
export const armdemo_obstacle: (a: number) => [number, number];
export const armdemo_potential: (a: number) => number;
export const armdemo_set_configuration: (a: number, b: number, c: number) => [number, number];
export const armdemo_set_goal: (a: number, b: number, c: number) => [number, number];
export const armdemo_set_obstacle: (a: number, b: number, c: number, d: number) => [number, number];
export const armdemo_step: (a: number, b: number, c: number) => [number, number];
export const armdemo_time: (a: number) => number;
export const diffeodemo_forward: (a: number, b: number, c: number) => [number, number];
export const diffeodemo_inverse: (a: number, b: number, c: number) => [number, number];
export const diffeodemo_log_det: (a: number, b: number, c: number) => number;
export const diffeodemo_new: (a: number, b: number, c: number, d: number) => number;
export const diffeodemo_roundtrip_error: (a: number, b: number, c: number) => number;
export const diffeodemo_warp_grid: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
