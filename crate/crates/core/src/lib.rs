//! Universal dialogue-act schema alignment and the U-DAT hierarchical
//! multi-label dialogue-act tagger.
//!
//! * [`corpus`]: canonical dialogue model, native dataset adapters, statistics
//!   and a synthetic generator.
//! * [`schema`]: the 20-act universal schema and the declarative alignment engine.
//! * [`model`]: the hierarchical recurrent tagger with hand-written backpropagation.
//! * [`training`]: Adam training loop, micro-F1 evaluation, transfer matrices
//!   and learning curves.
//! * [`experiments`]: self-training and leave-one-domain-out protocols.

pub mod corpus;
pub mod schema;
pub mod model;
pub mod training;
pub mod experiments;
