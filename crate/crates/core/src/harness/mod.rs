//! Benchmark plant, noise and SNR handling, Monte Carlo sweeps and result
//! emission for the three-mass chain experiments.

mod benchmark;
mod emit;
mod montecarlo;
mod noise;

pub use benchmark::{
    build_three_mass, chain_modes, default_controller, Benchmark, BenchmarkSpec, LeadLagSpec,
    NoiseSpec, Realization,
};
pub use emit::{emit_results, read_table_csv, render_svg, write_table_csv, OutputFormat};
pub use montecarlo::{
    default_tracked, param_label, run_monte_carlo, McConfig, McResultTable, McRow, McRunStats,
    Pipeline,
};
pub use noise::{calibrate_snr, gen_noise, measured_snr_db};
