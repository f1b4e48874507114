//! Bottom-up synthesis of spreadsheet string formulas from input/output
//! examples, with a learned classifier over property signatures steering
//! which intermediate values get explored first.

pub mod dsl;
pub mod sigs;
pub mod model;
pub mod search;
pub mod datagen;
