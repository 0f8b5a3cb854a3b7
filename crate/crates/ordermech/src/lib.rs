//! Revenue-optimal mechanisms for a single buyer whose interests are partially ordered.

pub mod chain;
pub mod dist;
pub mod dmr;
pub mod dual;
pub mod io;
pub mod master;
pub mod num;
pub mod oracle;
pub mod poset;
pub mod pwl;
pub mod three;
pub mod verify;
