//! Acceptance checks live in `tests/acceptance.rs`; this crate has no library code.
//!
//! They run the full simulation protocol and take tens of minutes on one core.
