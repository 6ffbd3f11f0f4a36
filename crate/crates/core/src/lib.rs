pub mod engine;
pub mod error;
pub mod events;
pub mod factor;
pub mod gate;
pub mod ingest;
pub mod instrument;
pub mod linalg;
pub mod model;
pub mod planner;
pub mod reliability;
pub mod scoring;
pub mod simulate;
pub mod state;
pub mod store;
