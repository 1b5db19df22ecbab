//! Exact, constructive checks that symmetric payment rules cannot balance the
//! budget of mechanisms such as the second-price (Vickrey) auction.
//!
//! The crate is organised bottom-up:
//!
//! - [`arith`]: exact rationals.
//! - [`bids`]: bid vectors, bags, restrictions, completions, full families.
//! - [`rules`]: price rules `f` and flat-invariance checks.
//! - [`payments`]: adequate sets and the payments they force.
//! - [`witness`]: counterexample triples, witness sets, the theorem pipeline.
//! - [`feasibility`]: the independent linear-algebra oracle with certificates.
//!
//! Inner loops fan out over rayon with the `parallel` feature (default); see
//! [`exec`].

pub mod arith;
pub mod bids;
pub mod error;
pub mod exec;
pub mod feasibility;
pub mod payments;
pub mod rules;
pub mod witness;

pub use arith::Rational;
pub use bids::{BidMultiset, BidVector, BidderId, BidderSet, FullFamily};
pub use error::{Error, Result};
pub use feasibility::{
    build_balance_system, solve_or_refute, verify_certificate, Certificate, LinearSystem, Outcome,
};
pub use payments::{
    build_adequate_set, corollary_sum, is_adequate, iterate_table, lemma1_price, AdequateSet,
    IterationTrace, PaymentTable, Quintuple,
};
pub use rules::PriceRule;
pub use witness::{
    is_counterexample, lemma3_check, theorem_verify, vickrey_theorem, vickrey_vectors,
    vickrey_witness_set, CounterexampleTriple, Tag, TheoremReport,
};
