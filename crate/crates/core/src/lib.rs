pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod pipeline;
pub mod providers;
pub mod retrieval;
pub mod shift;
