//! Shared fixtures for integration tests. Each test binary compiles its
//! own copy, so fixtures one binary never touches are expected.
#![allow(dead_code)]

pub mod golden;
pub mod harness;
pub mod oracle;
