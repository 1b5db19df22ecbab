//! Counterexample triples, the imbalance inequality, and the end-to-end check
//! that a rule cannot be balanced by any symmetric payment.
//!
//! A counterexample for `f` is a pair of vectors `low`, `high` on the same
//! bidders plus a tag per bidder choosing between `f` and an auxiliary rule
//! `g`, such that exactly one of `f`, `g` changes between the two vectors and
//! at least one bidder is tagged `g`. If the forced payment sums of both
//! vectors are tag-selected averages, `f(b) − Σ_i P(⟦b − i⟧)` must differ
//! between `low` and `high`, so the balance equation cannot hold at both.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::arith::Rational;
use crate::bids::{extend, flat, full_family, BidVector, BidderId};
use crate::error::{Error, Result};
use crate::exec;
use crate::payments::{build_adequate_set, check_adequacy, corollary_sum, partner_quintuple};
use crate::rules::PriceRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    F,
    G,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::F => "f",
            Tag::G => "g",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CounterexampleTriple {
    pub low: BidVector,
    pub high: BidVector,
    pub tags: BTreeMap<BidderId, Tag>,
    pub g: PriceRule,
}

impl CounterexampleTriple {
    fn select<'a>(&'a self, f: &'a PriceRule, tag: Tag) -> &'a PriceRule {
        match tag {
            Tag::F => f,
            Tag::G => &self.g,
        }
    }

    /// `(h(i))(b)`.
    pub fn tagged_value(&self, f: &PriceRule, i: BidderId, b: &BidVector) -> Result<Rational> {
        let tag = *self
            .tags
            .get(&i)
            .ok_or_else(|| Error::Precondition(format!("no tag for bidder {i}")))?;
        self.select(f, tag).eval(b)
    }

    pub fn relabel(&self, perm: &BTreeMap<BidderId, BidderId>) -> CounterexampleTriple {
        CounterexampleTriple {
            low: self.low.relabel(perm),
            high: self.high.relabel(perm),
            tags: self
                .tags
                .iter()
                .map(|(i, t)| (*perm.get(i).unwrap_or(i), *t))
                .collect(),
            g: self.g.clone(),
        }
    }
}

/// Explains why `t` is not a counterexample for `f`, if it is not.
pub fn counterexample_check(t: &CounterexampleTriple, f: &PriceRule) -> std::result::Result<(), String> {
    let dom = t.low.domain();
    if dom != t.high.domain() {
        return Err("low and high have different domains".into());
    }
    let tagged: BTreeSet<BidderId> = t.tags.keys().copied().collect();
    if tagged != dom {
        return Err("tags are not a total map on the domain".into());
    }
    let diff = |rule: &PriceRule| -> std::result::Result<Rational, String> {
        Ok(rule.eval(&t.high).map_err(|e| e.to_string())? - rule.eval(&t.low).map_err(|e| e.to_string())?)
    };
    let df = diff(f)?;
    let dg = diff(&t.g)?;
    if df.is_zero() == dg.is_zero() {
        return Err(format!(
            "need exactly one zero among the differences, got f: {df}, g: {dg}"
        ));
    }
    // With every tag on f the tag-weighted average collapses to f itself and
    // both sides of the inequality are zero.
    if !t.tags.values().any(|tag| *tag == Tag::G) {
        return Err("no bidder is tagged g".into());
    }
    Ok(())
}

pub fn is_counterexample(t: &CounterexampleTriple, f: &PriceRule) -> bool {
    counterexample_check(t, f).is_ok()
}

/// `f(b) − (1/|dom b|) Σ_i (h(i))(b)` for `b = low` and `b = high`, with no
/// precondition checks.
pub fn lemma3_sides(t: &CounterexampleTriple, f: &PriceRule) -> Result<(Rational, Rational)> {
    let side = |b: &BidVector| -> Result<Rational> {
        if b.is_empty() {
            return Err(Error::Precondition("empty bid vector".into()));
        }
        let mut total = Rational::zero();
        for (i, _) in b.iter() {
            total += &t.tagged_value(f, i, b)?;
        }
        Ok(f.eval(b)? - total.div_int(b.len() as i64)?)
    };
    Ok((side(&t.low)?, side(&t.high)?))
}

/// Both sides of the imbalance inequality and whether they differ.
pub fn lemma3_check(t: &CounterexampleTriple, f: &PriceRule) -> Result<(Rational, Rational, bool)> {
    if t.low.len() < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 bidders, got {}",
            t.low.len()
        )));
    }
    counterexample_check(t, f)
        .map_err(|reason| Error::Precondition(format!("not a counterexample: {reason}")))?;
    let (lhs, rhs) = lemma3_sides(t, f)?;
    let differ = lhs != rhs;
    Ok((lhs, rhs, differ))
}

/// `low = (1, …, n, n+1, n+3)` and `high = (1, …, n, n+2, n+3)` on bidders
/// `1..=n+2`.
pub fn vickrey_vectors(n: u64) -> Result<(BidVector, BidVector)> {
    if n < 1 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let low = BidVector::from_pairs(
        (1..=n + 1)
            .map(|i| (i, i as i64))
            .chain([(n + 2, n as i64 + 3)]),
    );
    let mut high = low.clone();
    high.insert(BidderId(n + 1), Rational::integer(n as i64 + 2));
    Ok((low, high))
}

/// Partner choice for the Vickrey vectors: every bidder pairs with the top
/// bidder, and the top bidder pairs with the runner-up.
pub fn default_partners(b: &BidVector) -> BTreeMap<BidderId, BidderId> {
    let ranked = |v: &BidVector| v.iter().max_by(|(i, x), (j, y)| x.cmp(y).then(j.cmp(i))).map(|(i, _)| i);
    let Some(top) = ranked(b) else {
        return BTreeMap::new();
    };
    let runner_up = ranked(&b.without_one(top));
    b.iter()
        .filter_map(|(i, _)| {
            if i == top {
                runner_up.map(|r| (i, r))
            } else {
                Some((i, top))
            }
        })
        .collect()
}

/// The Vickrey counterexample: `f = −f2`, `g = −max`, every bidder tagged `g`
/// except the top bidder.
pub fn vickrey_triple(n: u64) -> Result<CounterexampleTriple> {
    let (low, high) = vickrey_vectors(n)?;
    let top = BidderId(n + 2);
    let tags = low
        .iter()
        .map(|(i, _)| (i, if i == top { Tag::F } else { Tag::G }))
        .collect();
    Ok(CounterexampleTriple {
        low,
        high,
        tags,
        g: PriceRule::NegFirstPrice,
    })
}

/// The finite set of vectors on which the balance equation for the Vickrey
/// rule is already contradictory.
///
/// For each of `low`, `high` with top bid `n+3`: one adequate set per
/// non-top bidder `i`, paired with the top bidder at fill `n+3`; one for the
/// top bidder and the runner-up at the runner-up's bid; then `low` and `high`
/// themselves.
pub fn vickrey_witness_set(n: u64) -> Result<BTreeSet<BidVector>> {
    let (low, high) = vickrey_vectors(n)?;
    let top_bid = Rational::integer(n as i64 + 3);
    let mut out = BTreeSet::new();
    for (b, runner_up_bid) in [(&low, n as i64 + 1), (&high, n as i64 + 2)] {
        let runner_up_bid = Rational::integer(runner_up_bid);
        let tops = b.preimage(&[top_bid.clone()].into());
        for j in &tops {
            for (i, _) in b.iter().filter(|(i, _)| i != j) {
                let pair = [i, *j].into();
                let family = full_family(&b.without(&pair), &top_bid).member_set();
                out.extend(extend(&flat(&pair, &top_bid), &family)?);
            }
        }
        let pair = b.preimage(&[runner_up_bid.clone(), top_bid.clone()].into());
        let family = full_family(&b.without(&pair), &runner_up_bid).member_set();
        out.extend(extend(&flat(&pair, &runner_up_bid), &family)?);
    }
    out.insert(low);
    out.insert(high);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Hypothesis {
    fn new(name: impl Into<String>, outcome: std::result::Result<String, String>) -> Self {
        let (pass, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        Hypothesis {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TheoremReport {
    /// `f(low) − Σ_i P(⟦low − i⟧)`; `None` when hypotheses fail.
    pub lhs: Option<Rational>,
    pub rhs: Option<Rational>,
    /// All hypotheses passed and `lhs ≠ rhs`.
    pub holds: bool,
    pub hypotheses_met: bool,
    pub eta_low: BTreeMap<BidderId, Rational>,
    pub eta_high: BTreeMap<BidderId, Rational>,
    /// Every vector the balance equation is imposed on: all adequate sets
    /// plus `low` and `high`.
    pub witness_set: BTreeSet<BidVector>,
    pub hypothesis_log: Vec<Hypothesis>,
}

impl TheoremReport {
    pub fn summary(&self) -> String {
        match (&self.lhs, &self.rhs, self.holds) {
            (Some(l), Some(r), true) => format!("HOLDS lhs={l} rhs={r}"),
            _ => "HYPOTHESES NOT MET".to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl Serialize for TheoremReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ids = |m: &BTreeMap<BidderId, Rational>| -> BTreeMap<u64, Rational> {
            m.iter().map(|(i, v)| (i.0, v.clone())).collect()
        };
        let mut st = s.serialize_struct("TheoremReport", 8)?;
        st.serialize_field("lhs", &self.lhs)?;
        st.serialize_field("rhs", &self.rhs)?;
        st.serialize_field("holds", &self.holds)?;
        st.serialize_field("hypotheses_met", &self.hypotheses_met)?;
        st.serialize_field("eta_low", &ids(&self.eta_low))?;
        st.serialize_field("eta_high", &ids(&self.eta_high))?;
        st.serialize_field("witness_size", &self.witness_set.len())?;
        st.serialize_field("hypotheses", &self.hypothesis_log)?;
        st.end()
    }
}

struct SideCheck {
    entries: Vec<Hypothesis>,
    eta: BTreeMap<BidderId, Rational>,
    members: BTreeSet<BidVector>,
}

fn check_side(
    label: &str,
    b: &BidVector,
    f: &PriceRule,
    t: &CounterexampleTriple,
    partners: &BTreeMap<BidderId, BidderId>,
) -> SideCheck {
    let ids: Vec<BidderId> = b.domain().into_iter().collect();
    let per_bidder = exec::map(&ids, |&i| {
        let mut entries = Vec::new();
        let mut eta = None;
        let mut members = BTreeSet::new();

        let adequacy = (|| -> std::result::Result<String, String> {
            let j = *partners.get(&i).ok_or("no partner given")?;
            let q = partner_quintuple(b, f, i, j).map_err(|e| e.to_string())?;
            let set = build_adequate_set(&q).map_err(|e| e.to_string())?;
            let verdict = check_adequacy(&set.members, &q);
            members = set.members;
            verdict.structure.and(verdict.flat)?;
            Ok(format!("partner {j}, fill {}, {} vectors", q.fill, members.len()))
        })();
        entries.push(Hypothesis::new(format!("adequate[{label},{i}]"), adequacy));

        let compat = (|| -> std::result::Result<String, String> {
            let j = *partners.get(&i).ok_or("no partner given")?;
            let fill = b.get(j).ok_or(format!("partner {j} is not a bidder"))?;
            let value = f.eval(&flat(&b.domain(), fill)).map_err(|e| e.to_string())?;
            eta = Some(value.clone());
            let tagged = t.tagged_value(f, i, b).map_err(|e| e.to_string())?;
            if value == tagged {
                Ok(format!("eta = {value} = {}(b)", t.tags[&i]))
            } else {
                Err(format!("eta = {value} but {}(b) = {tagged}", t.tags[&i]))
            }
        })();
        entries.push(Hypothesis::new(format!("eta-compat[{label},{i}]"), compat));

        (i, entries, eta, members)
    });

    let mut out = SideCheck {
        entries: Vec::new(),
        eta: BTreeMap::new(),
        members: BTreeSet::new(),
    };
    for (i, entries, eta, members) in per_bidder {
        out.entries.extend(entries);
        if let Some(v) = eta {
            out.eta.insert(i, v);
        }
        out.members.extend(members);
    }
    out
}

/// Checks every hypothesis of the imbalance theorem for `(f, t)` with the
/// given partner choices, logging each, and evaluates both sides when all
/// pass. Failures are recorded, never raised.
pub fn theorem_verify(
    f: &PriceRule,
    t: &CounterexampleTriple,
    partners_low: &BTreeMap<BidderId, BidderId>,
    partners_high: &BTreeMap<BidderId, BidderId>,
) -> TheoremReport {
    let mut log = vec![
        Hypothesis::new(
            "counterexample",
            counterexample_check(t, f).map(|()| "exactly one of f, g changes; g is used".into()),
        ),
        Hypothesis::new(
            "domain-size",
            if t.low.len() >= 2 {
                Ok(format!("{} bidders", t.low.len()))
            } else {
                Err(format!("{} bidders, need at least 2", t.low.len()))
            },
        ),
    ];

    let low = check_side("low", &t.low, f, t, partners_low);
    let high = check_side("high", &t.high, f, t, partners_high);
    log.extend(low.entries);
    log.extend(high.entries);

    let mut witness_set = low.members;
    witness_set.extend(high.members);
    witness_set.insert(t.low.clone());
    witness_set.insert(t.high.clone());

    let hypotheses_met = log.iter().all(|h| h.pass);
    let mut report = TheoremReport {
        lhs: None,
        rhs: None,
        holds: false,
        hypotheses_met,
        eta_low: low.eta,
        eta_high: high.eta,
        witness_set,
        hypothesis_log: log,
    };
    if !hypotheses_met {
        return report;
    }

    let side = |b: &BidVector, partners| -> Result<Rational> {
        Ok(f.eval(b)? - corollary_sum(b, f, partners)?.sum)
    };
    match (side(&t.low, partners_low), side(&t.high, partners_high)) {
        (Ok(l), Ok(r)) => {
            report.holds = l != r;
            report.lhs = Some(l);
            report.rhs = Some(r);
        }
        (Err(e), _) | (_, Err(e)) => {
            report.hypotheses_met = false;
            report
                .hypothesis_log
                .push(Hypothesis::new("payment-sums", Err(e.to_string())));
        }
    }
    report
}

/// [`theorem_verify`] on the built-in Vickrey instance of size `n`.
pub fn vickrey_theorem(n: u64) -> Result<TheoremReport> {
    let t = vickrey_triple(n)?;
    let pl = default_partners(&t.low);
    let ph = default_partners(&t.high);
    Ok(theorem_verify(&PriceRule::NegSecondPrice, &t, &pl, &ph))
}
