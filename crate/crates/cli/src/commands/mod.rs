//! One module per subcommand.

pub mod build_dpr;
pub mod chunk;
pub mod evaluate;
pub mod generate;
pub mod human_eval;
pub mod ingest;
pub mod split;
pub mod stats;
pub mod summarize;
