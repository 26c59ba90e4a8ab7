//! Personal information repositories with policy-filtered immutable views.
//!
//! An owner keeps every fact in a master repository. Other principals never
//! read that repository directly: they clone, pull and query a snapshot
//! filtered by the owner's read grants, and push contributions that are
//! checked against write grants.
//!
//! * [`model`]: terms, quads, patterns, queries and their canonical encoding
//! * [`store`]: content-addressed objects, commits and refs
//! * [`map`]: conjunctive query evaluation and standing-query deltas
//! * [`access`]: policy decoding, policy views and sealed views
//! * [`sync`]: init, add, grant, clone, pull, push
//! * [`harness`]: scripted scenarios and randomized property checks

pub mod access;
pub mod error;
pub mod harness;
pub mod map;
pub mod model;
pub mod store;
pub mod sync;

pub use access::{chain_eval, permitted_write, policy_view, seal, Mode, Policy, SealedView};
pub use error::{Error, Result};
pub use map::{brute_force_eval, eval_map, map_delta, match_pattern, Delta};
pub use model::{
    parse_fact_line, parse_query, Atom, Binding, FactSet, MapQuery, Pattern, Principal, Quad, Term,
    Variable,
};
pub use store::{Commit, Hash, RefName, Repo};
pub use sync::{Credential, SyncReceipt};
