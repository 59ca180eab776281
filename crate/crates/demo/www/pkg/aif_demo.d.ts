/* tslint:disable */
/* eslint-disable */

/**
 * Channels of the bundled scenario with their outcomes.
 */
export function channels(): string;

/**
 * Updates a prior with `P(ph_acidic) = prior_acidic` on one reading.
 */
export function posterior(prior_acidic: number, channel: string, outcome: string): string;

/**
 * Runs one seeded episode from `initial_ph` with refinement threshold `threshold`.
 */
export function run_episode(seed: bigint, initial_ph: number, threshold: number): string;

/**
 * Expected free energy of every candidate policy from the given belief,
 * with the executive veto applied at `veto_mass`.
 */
export function score_policies(prior_acidic: number, veto_mass: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly channels: () => [number, number, number, number];
    readonly posterior: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly run_episode: (a: bigint, b: number, c: number) => [number, number, number, number];
    readonly score_policies: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
