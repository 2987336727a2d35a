pub mod arith;
pub mod cyclo;
pub mod grpdata;
pub mod help;
pub mod lattice;
pub mod lp;
pub mod modalg;
pub mod report;
