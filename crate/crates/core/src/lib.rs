pub mod cli;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod flatten;
pub mod input;
pub mod manifest;
pub mod oracle;
pub mod pipeline;
pub mod plan;
pub mod provenance;
pub mod syntax;
pub mod term;
