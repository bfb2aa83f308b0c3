//! Acceptance gate for the workspace. The checks live in `tests/acceptance.rs`;
//! the package sorts last so that `cargo test --workspace` runs every other
//! suite before it.
