//! Seminar management: enrollment with capacity limits, hourly attendance,
//! automatic completion, material and announcement distribution, and
//! printable certificates.

pub mod api;
pub mod certificate;
pub mod clock;
pub mod config;
pub mod domain;
pub mod notifier;
pub mod persistence;
pub mod seed;
pub mod server;
