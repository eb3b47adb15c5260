pub mod abstraction;
pub mod bridge;
pub mod exec;
pub mod format;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod logic;
pub mod pipeline;
pub mod special;
pub mod synthesis;
