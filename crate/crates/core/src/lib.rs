//! Articulated truck simulation, trailer camera calibration baselines and the
//! dCAP decoder.

pub mod dataset;
pub mod geom;
pub mod kf;
pub mod kinematics;
pub mod model;
pub mod report;
pub mod scale;
pub mod seed;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kinematics(#[from] kinematics::KinematicsError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Kf(#[from] kf::KfError),
    #[error(transparent)]
    Scale(#[from] scale::ScaleError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
}
