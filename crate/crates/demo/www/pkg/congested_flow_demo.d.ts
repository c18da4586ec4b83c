/* tslint:disable */
/* eslint-disable */

/**
 * One discretized run of a named scenario.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Eulerian density and velocity at time `t`, one cell per row:
     * `[x_left, x_right, density, velocity]`. The first cell is the
     * padding cell to the left of the first particle.
     */
    density(t: number): Float64Array;
    event_times(): Float64Array;
    horizon(): number;
    n(): number;
    constructor(scenario: string, parameter: number, n: number);
    /**
     * Total mass of the pressure atoms.
     */
    pressure_mass(): number;
    /**
     * Number of particles per row of [`Simulation::worldlines`].
     */
    worldline_count(max_lines: number): number;
    /**
     * Trajectories of at most `max_lines` evenly strided particles at
     * `frames` uniform times in `[0, horizon]`. Row-major, one row per frame:
     * `[t, x_a, x_b, ...]`.
     */
    worldlines(frames: number, max_lines: number): Float64Array;
}

export function scenario_names(): string[];

export function two_block_profiles(eta: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly scenario_names: () => [number, number];
    readonly simulation_density: (a: number, b: number) => [number, number];
    readonly simulation_event_times: (a: number) => [number, number];
    readonly simulation_horizon: (a: number) => number;
    readonly simulation_n: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly simulation_pressure_mass: (a: number) => number;
    readonly simulation_worldline_count: (a: number, b: number) => number;
    readonly simulation_worldlines: (a: number, b: number, c: number) => [number, number];
    readonly two_block_profiles: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
