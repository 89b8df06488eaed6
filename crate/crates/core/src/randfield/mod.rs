//! Lognormal random fields by Karhunen–Loève expansion, and a 1D elastic
//! bar reliability problem built on them.

mod bar;
mod kl;

pub use bar::{bar_lsf, BarConfig, BarProblem, BarSolution};
pub use kl::{exp_kernel, lognormal_to_gaussian, nystrom_kl, realize_lognormal_field, KLExpansion, LognormalField};
