//! Crew scheduling: instance generation, integer models, a PPO scheduler,
//! coefficient extraction and disruption experiments.

pub mod disruption;
pub mod domain;
pub mod env;
pub mod extract;
pub mod formulation;
pub mod generator;
pub mod io;
pub mod policy;
pub mod ppo;
pub mod report;
pub mod seeds;
pub mod stats;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] domain::DomainError),
    #[error(transparent)]
    Profile(#[from] generator::ProfileError),
    #[error(transparent)]
    Formulation(#[from] formulation::FormulationError),
    #[error(transparent)]
    Solver(#[from] crew_milp::MilpError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Policy(#[from] policy::PolicyError),
    #[error(transparent)]
    Env(#[from] env::EnvError),
    #[error(transparent)]
    Train(#[from] ppo::TrainError),
    #[error(transparent)]
    Disruption(#[from] disruption::DisruptionError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}
