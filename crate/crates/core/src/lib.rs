pub mod groupoid;
pub mod syntax;
pub mod homotopy;
pub mod kernel;
pub mod semantics;
pub mod gen;
pub mod cli;
