//! Command-line orchestration, the parallel runner, reports and the demo
//! scenarios.

use thiserror::Error;

pub mod cli;
pub mod ebs;
pub mod grid;
pub mod io;
pub mod polar;
pub mod report;
pub mod runner;
pub mod semaphore;

pub use cli::cli_main;
pub use ebs::{build_ebs_demo, run_ebs_demo, EbsDemo, EbsOutcome, EbsParams};
pub use grid::{generate_grid, write_grid_csv, Grid};
pub use polar::{polar_points, project_polar, render_polar_svg, write_polar_csv, PolarPoint};
pub use report::{parse_report, render_report, Report};
pub use runner::{default_workers, region_seed, run_parallel_verification};
pub use semaphore::{build_semaphore_classifier, Semaphore};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Region(#[from] crate::regions::RegionError),
    #[error(transparent)]
    Verify(#[from] crate::verifier::VerifyError),
    #[error(transparent)]
    Contract(#[from] crate::contracts::ContractError),
    #[error(transparent)]
    Property(#[from] crate::contracts::PropertyError),
    #[error(transparent)]
    Compose(#[from] crate::compose::ComposeError),
    #[error(transparent)]
    Guard(#[from] crate::guard::GuardError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
