//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

pub mod gen;
pub mod gradcheck;
pub mod malformed;
pub mod oracle;
pub mod refparse;
