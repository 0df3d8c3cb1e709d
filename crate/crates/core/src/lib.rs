pub mod backward;
pub mod data;
pub mod entry;
pub mod error;
pub mod filter;
pub mod forward;
pub mod manifest;
pub mod model;
pub mod pipeline;
pub mod vsink;
