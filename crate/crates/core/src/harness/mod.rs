//! Generators, batch verification and scaling benchmarks.

pub mod bench;
pub mod equisat;
pub mod gen;

pub use bench::{bench_scaling, fit_exponent, BenchRow, ExponentFit, ScalingConfig};
pub use equisat::{check_equisat, cv_growth, BatchConfig, EquisatReport, FailureDump, Step};
pub use gen::{adversarial_rd, generate, generate_kind, generate_over, GenKind, GeneratorConfig};
