pub mod analysis;
pub mod ast;
pub mod cli;
pub mod engine;
pub mod ground;
pub mod linear;
pub mod oracle;
pub mod parser;
pub mod pops;
pub mod store;
