/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const scenario_names: () => [number, number];
export const simulation_density: (a: number, b: number) => [number, number];
export const simulation_event_times: (a: number) => [number, number];
export const simulation_horizon: (a: number) => number;
export const simulation_n: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const simulation_pressure_mass: (a: number) => number;
export const simulation_worldline_count: (a: number, b: number) => number;
export const simulation_worldlines: (a: number, b: number, c: number) => [number, number];
export const two_block_profiles: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
