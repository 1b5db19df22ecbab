//! Price rules: the map from a bid vector to the amount the balance equation
//! pins the total payment to.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::arith::{self, Rational};
use crate::bids::{flat, BidVector, BidderSet};
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub enum PriceRule {
    /// Highest bid once one occurrence of the maximum is removed.
    SecondPrice,
    NegSecondPrice,
    FirstPrice,
    NegFirstPrice,
    Constant(Rational),
    /// Defined exactly on the keys of a finite table.
    External {
        name: String,
        table: Arc<BTreeMap<BidVector, Rational>>,
    },
}

impl PriceRule {
    /// Registers a table-backed rule.
    pub fn external(name: impl Into<String>, table: BTreeMap<BidVector, Rational>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Precondition("external rule table is empty".into()));
        }
        Ok(PriceRule::External {
            name: name.into(),
            table: Arc::new(table),
        })
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    fn min_arity(&self) -> usize {
        match self {
            PriceRule::SecondPrice | PriceRule::NegSecondPrice => 2,
            PriceRule::FirstPrice | PriceRule::NegFirstPrice | PriceRule::Constant(_) => 1,
            PriceRule::External { .. } => 0,
        }
    }

    pub fn eval(&self, b: &BidVector) -> Result<Rational> {
        let min = self.min_arity();
        if b.len() < min {
            return Err(Error::ArityUndefined {
                rule: self.name(),
                min,
                got: b.len(),
            });
        }
        Ok(match self {
            PriceRule::SecondPrice => second_highest(b),
            PriceRule::NegSecondPrice => -second_highest(b),
            PriceRule::FirstPrice => highest(b),
            PriceRule::NegFirstPrice => -highest(b),
            PriceRule::Constant(c) => c.clone(),
            PriceRule::External { name, table } => {
                table.get(b).cloned().ok_or_else(|| Error::UndefinedAt {
                    rule: name.clone(),
                    bids: b.to_string(),
                })?
            }
        })
    }

    /// Checks that the rule takes its flat value `f(ids × {fill})` on every
    /// member of `set`. Every member must have domain `ids`.
    pub fn check_flat_invariance<'a>(
        &self,
        set: impl IntoIterator<Item = &'a BidVector>,
        ids: &BidderSet,
        fill: &Rational,
    ) -> Result<bool> {
        Ok(self.first_flat_violation(set, ids, fill)?.is_none())
    }

    /// The first member (in iteration order) on which the rule differs from
    /// its flat value, together with both values.
    pub fn first_flat_violation<'a>(
        &self,
        set: impl IntoIterator<Item = &'a BidVector>,
        ids: &BidderSet,
        fill: &Rational,
    ) -> Result<Option<(BidVector, Rational, Rational)>> {
        let target = self.eval(&flat(ids, fill))?;
        for member in set {
            if &member.domain() != ids {
                return Err(Error::DomainMismatch(format!(
                    "member {member} does not have domain {:?}",
                    ids.iter().map(|i| i.0).collect::<Vec<_>>()
                )));
            }
            let v = self.eval(member)?;
            if v != target {
                return Ok(Some((member.clone(), v, target)));
            }
        }
        Ok(None)
    }
}

fn highest(b: &BidVector) -> Rational {
    b.max_bid().expect("arity checked").clone()
}

fn second_highest(b: &BidVector) -> Rational {
    let bag = b.bag();
    let top = bag.max_value().expect("arity checked").clone();
    bag.remove_one(&top)
        .and_then(|rest| rest.max_value().cloned())
        .expect("arity checked")
}

impl fmt::Display for PriceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceRule::SecondPrice => f.write_str("second-price"),
            PriceRule::NegSecondPrice => f.write_str("neg-second-price"),
            PriceRule::FirstPrice => f.write_str("first-price"),
            PriceRule::NegFirstPrice => f.write_str("neg-first-price"),
            PriceRule::Constant(c) => write!(f, "constant:{c}"),
            PriceRule::External { name, .. } => f.write_str(name),
        }
    }
}

impl fmt::Debug for PriceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses a built-in rule name. External rules are not nameable and must be
/// built with [`PriceRule::external`].
impl FromStr for PriceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "second-price" => Ok(PriceRule::SecondPrice),
            "neg-second-price" => Ok(PriceRule::NegSecondPrice),
            "first-price" => Ok(PriceRule::FirstPrice),
            "neg-first-price" => Ok(PriceRule::NegFirstPrice),
            _ => match s.strip_prefix("constant:") {
                Some(c) => Ok(PriceRule::Constant(arith::parse(c)?)),
                None => Err(Error::UnknownRule(s.to_string())),
            },
        }
    }
}

/// Builds the table for an external rule from the values another rule takes
/// on `points`.
pub fn tabulate<'a>(
    rule: &PriceRule,
    points: impl IntoIterator<Item = &'a BidVector>,
) -> Result<BTreeMap<BidVector, Rational>> {
    let points: BTreeSet<&BidVector> = points.into_iter().collect();
    points
        .into_iter()
        .map(|b| Ok((b.clone(), rule.eval(b)?)))
        .collect()
}
