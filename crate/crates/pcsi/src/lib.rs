//! PCSI: convert web pages into structured content objects with shared
//! Hex scripts, and produce the records that let instances select
//! scripts and report outcomes.

pub mod cssselect;
pub mod ere;
pub mod hexlang;
pub mod htmldom;
pub mod sexpr;

pub use sexpr::{Digest, Value};
