//! Cherednik operators of type BC, Bernstein-Sato identities for `|SH|^delta`
//! and `CH^delta`, the Garding-Gindikin distribution, and the Radon inversion
//! constants of matrix balls, all with numerical verification harnesses.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bsverify;
pub mod cherednik;
mod error;
pub mod ggdist;
pub mod jets;
pub mod quadrature;
pub mod radon1;
pub mod real;
pub mod report;
pub mod rootsys;
pub mod special;

pub use error::{Error, Result};
pub use real::{Dd, Real};
pub use report::VerificationReport;
pub use rootsys::{domain_params, weyl_elements, DomainParams, GroupElement, RootData};
