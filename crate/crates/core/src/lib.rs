pub mod datalog;
pub mod term;
pub mod script;
pub mod report;
pub mod spec;
pub mod emit;
pub mod validate;
