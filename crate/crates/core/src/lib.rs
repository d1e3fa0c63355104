//! Software-space analysis of research software mentions.
//!
//! The crate turns paper-level software mention records into a discipline by
//! tool count matrix, measures revealed comparative advantage, links tools by
//! co-specialization proximity, extracts a readable backbone, finds tool
//! communities with a degree-corrected block model, tracks discipline
//! portfolios over rolling windows and fits the heavy tail of tool usage.
//!
//! Each stage is usable on its own; [`pipeline`] chains them with file
//! contracts and run manifests, and the `softspace` binary exposes the
//! pipeline on the command line.

pub mod backbone;
pub mod community;
pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod graphml;
pub mod io;
pub mod pipeline;
pub mod proximity;
pub mod scalefit;
pub mod specialization;
pub mod synth;

pub use error::{Error, Result};
