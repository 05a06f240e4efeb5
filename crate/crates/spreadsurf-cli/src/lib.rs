//! Library surface of the spreadsurf CLI: run-file parsing, command
//! implementations, and the manifest/report formats, shared with the
//! integration tests.

pub mod commands;
pub mod manifest;
pub mod runfile;
