//! Quali-quantitative system-dynamics modeling.
//!
//! Models combine a qualitative influence diagram (links with polarity,
//! delay and effect-order tags) with quantified stocks, flows and
//! auxiliaries. The crate parses the `.mag` text format, validates models,
//! enumerates feedback loops, simulates scenarios with explicit Euler
//! integration and compares them through indicators.
//!
//! ```
//! use magnitude::{dsl::parse_model, data::InlineOnly, sim::{run, Scenario}};
//!
//! let text = "model \"decay\" { time 0 .. 10 dt 1 }\n\
//!             const k = 0.5\n\
//!             aux decay = level * k\n\
//!             stock level init 8 outflow decay\n\
//!             link level -> decay polarity +\n\
//!             link k -> decay polarity +\n\
//!             link decay -> level polarity -\n";
//! let model = parse_model(text).model.unwrap();
//! let result = run(&model, &Scenario::baseline(), &InlineOnly).unwrap();
//! assert_eq!(result.series("level").unwrap()[..3], [8.0, 4.0, 2.0]);
//! ```

// Negated float comparisons are deliberate: NaN has to fail ordering checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod dsl;
pub mod expr;
pub mod graph;
pub mod import;
pub mod model;
pub mod reference;
pub mod service;
pub mod sim;
pub mod validate;

pub use diagnostics::{Diagnostic, Severity};
pub use model::Model;
