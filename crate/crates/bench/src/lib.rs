//! Shared fixtures for the benchmark suite.
