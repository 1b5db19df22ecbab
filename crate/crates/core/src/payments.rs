//! Symmetric payment values forced by the balance equations.
//!
//! A symmetric payment rule charges bidder `i` the amount `P(⟦b − i⟧)`, which
//! depends only on the bag of the other bids. Imposing
//! `Σ_i P(⟦b − i⟧) = f(b)` on an adequate set of bid vectors forces
//! `P(⟦base⟧ + ⟅b0⟆) = f(flat) / (2 + |dom base|)`. This module builds and
//! checks adequate sets, evaluates that closed form, replays the stepwise
//! elimination that motivates it, and sums the forced payments of a vector.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::bids::{
    completion_shapes, extend, flat, full_family, sub_multisets, BidMultiset, BidVector, BidderId,
    BidderSet, FullFamily,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::rules::PriceRule;

/// A partial map from bags to payments. Lookups outside the table are errors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PaymentTable {
    values: BTreeMap<BidMultiset, Rational>,
}

impl PaymentTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &BidMultiset) -> Result<&Rational> {
        self.values
            .get(key)
            .ok_or_else(|| Error::MissingPayment(key.to_string()))
    }

    pub fn insert(&mut self, key: BidMultiset, value: Rational) -> Option<Rational> {
        self.values.insert(key, value)
    }

    pub fn contains(&self, key: &BidMultiset) -> bool {
        self.values.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BidMultiset, &Rational)> + '_ {
        self.values.iter()
    }
}

impl FromIterator<(BidMultiset, Rational)> for PaymentTable {
    fn from_iter<T: IntoIterator<Item = (BidMultiset, Rational)>>(iter: T) -> Self {
        PaymentTable {
            values: iter.into_iter().collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    multiset: BidMultiset,
    value: Rational,
}

impl Serialize for PaymentTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.values.iter().map(|(m, v)| TableEntry {
            multiset: m.clone(),
            value: v.clone(),
        }))
    }
}

impl<'de> Deserialize<'de> for PaymentTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<TableEntry>::deserialize(d)?;
        let mut table = PaymentTable::new();
        for e in entries {
            if table.insert(e.multiset.clone(), e.value).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate multiset {}",
                    e.multiset
                )));
            }
        }
        Ok(table)
    }
}

/// The data an adequate set is adequate *for*.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quintuple {
    pub base: BidVector,
    pub fill: Rational,
    pub rule: PriceRule,
    pub i1: BidderId,
    pub i2: BidderId,
}

impl Quintuple {
    pub fn new(
        base: BidVector,
        fill: Rational,
        rule: PriceRule,
        i1: impl Into<BidderId>,
        i2: impl Into<BidderId>,
    ) -> Self {
        Quintuple {
            base,
            fill,
            rule,
            i1: i1.into(),
            i2: i2.into(),
        }
    }

    fn ids_are_fresh(&self) -> bool {
        self.i1 != self.i2 && !self.base.contains(self.i1) && !self.base.contains(self.i2)
    }

    fn pair_ids(&self) -> BidderSet {
        [self.i1, self.i2].into()
    }

    /// `{i1, i2} ∪ dom base`.
    pub fn full_domain(&self) -> BidderSet {
        let mut ids = self.base.domain();
        ids.insert(self.i1);
        ids.insert(self.i2);
        ids
    }

    /// `⟦base⟧ + ⟅fill⟆`, the bag whose payment the set pins down.
    pub fn target(&self) -> BidMultiset {
        self.base.bag().with_copies(&self.fill, 1)
    }

    pub fn flat_value(&self) -> Result<Rational> {
        self.rule.eval(&flat(&self.full_domain(), &self.fill))
    }
}

#[derive(Clone, Debug)]
pub struct AdequateSet {
    pub members: BTreeSet<BidVector>,
    pub quintuple: Quintuple,
    pub family: FullFamily,
    /// First member where the rule leaves its flat value: (member, value, flat value).
    pub flat_violation: Option<(BidVector, Rational, Rational)>,
}

impl AdequateSet {
    pub fn is_flat_invariant(&self) -> bool {
        self.flat_violation.is_none()
    }
}

/// `X = ({i1, i2} × {fill}) ⇀ Y` with `Y` the canonical full family of
/// `fill`-completions of `base`. Flat invariance is evaluated and recorded.
pub fn build_adequate_set(q: &Quintuple) -> Result<AdequateSet> {
    if !q.ids_are_fresh() {
        return Err(Error::BidderIds {
            i1: q.i1.0,
            i2: q.i2.0,
        });
    }
    let family = full_family(&q.base, &q.fill);
    let members = extend(&flat(&q.pair_ids(), &q.fill), &family.member_set())?;
    let flat_violation = q
        .rule
        .first_flat_violation(&members, &q.full_domain(), &q.fill)?;
    Ok(AdequateSet {
        members,
        quintuple: q.clone(),
        family,
        flat_violation,
    })
}

/// Outcome of checking both conditions of adequacy separately.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adequacy {
    /// `Err` describes why no full family `Y` gives `X = pairs ⇀ Y`.
    pub structure: std::result::Result<(), String>,
    /// `Err` describes the first member breaking flat invariance.
    pub flat: std::result::Result<(), String>,
}

impl Adequacy {
    pub fn holds(&self) -> bool {
        self.structure.is_ok() && self.flat.is_ok()
    }
}

pub fn is_adequate(set: &BTreeSet<BidVector>, q: &Quintuple) -> bool {
    check_adequacy(set, q).holds()
}

pub fn check_adequacy(set: &BTreeSet<BidVector>, q: &Quintuple) -> Adequacy {
    Adequacy {
        structure: check_structure(set, q),
        flat: check_flat(set, q),
    }
}

/// Whether `set = ({i1,i2} × {fill}) ⇀ Y` for *some* full family `Y` of
/// `fill`-completions of `base`.
///
/// `Y` must contain an m-completion for every `m ≤ ⟦base⟧` and nothing else,
/// so the check is a bipartite cover: every `m` needs a completion in `Y`, and
/// distinct `m` must be available to account for every member of `Y`.
pub fn check_structure(set: &BTreeSet<BidVector>, q: &Quintuple) -> std::result::Result<(), String> {
    if !q.ids_are_fresh() {
        return Err(format!("i1 = {}, i2 = {} are not fresh and distinct", q.i1, q.i2));
    }
    let pair_ids = q.pair_ids();
    let domain = q.full_domain();

    let mut family: Vec<(BidVector, BidMultiset, usize)> = Vec::new();
    for x in set {
        if x.domain() != domain {
            return Err(format!("member {x} has the wrong domain"));
        }
        if x.get(q.i1) != Some(&q.fill) || x.get(q.i2) != Some(&q.fill) {
            return Err(format!("member {x} does not bid {} at i1, i2", q.fill));
        }
        let y = x.without(&pair_ids);
        match completion_shapes(&q.base, &q.fill, &y) {
            Some((required, optional)) => family.push((y, required, optional)),
            None => return Err(format!("member {x} is not a completion of the base")),
        }
    }

    let subs = sub_multisets(&q.base.bag());
    // edges[s] = indices of family members that are subs[s]-completions
    let edges: Vec<Vec<usize>> = subs
        .iter()
        .map(|m| {
            family
                .iter()
                .enumerate()
                .filter(|(_, (_, required, optional))| {
                    let extra = m.len() as isize - required.len() as isize;
                    extra >= 0
                        && extra as usize <= *optional
                        && &required.with_copies(&q.fill, extra as usize) == m
                })
                .map(|(k, _)| k)
                .collect()
        })
        .collect();

    if let Some((s, _)) = edges.iter().enumerate().find(|(_, e)| e.is_empty()) {
        return Err(format!("no {}-completion in the set", subs[s]));
    }

    // Kuhn's augmenting paths: match each member to a distinct sub-multiset.
    let mut owner: Vec<Option<usize>> = vec![None; subs.len()];
    let mut by_member: Vec<Vec<usize>> = vec![Vec::new(); family.len()];
    for (s, e) in edges.iter().enumerate() {
        for &k in e {
            by_member[k].push(s);
        }
    }
    fn augment(
        k: usize,
        by_member: &[Vec<usize>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &s in &by_member[k] {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            if owner[s].is_none_or(|other| augment(other, by_member, owner, seen)) {
                owner[s] = Some(k);
                return true;
            }
        }
        false
    }
    for (k, (member, ..)) in family.iter().enumerate() {
        let mut seen = vec![false; subs.len()];
        if !augment(k, &by_member, &mut owner, &mut seen) {
            return Err(format!(
                "member {member} is surplus: every sub-multiset it completes is already covered"
            ));
        }
    }
    Ok(())
}

fn check_flat(set: &BTreeSet<BidVector>, q: &Quintuple) -> std::result::Result<(), String> {
    match q.rule.first_flat_violation(set, &q.full_domain(), &q.fill) {
        Ok(None) => Ok(()),
        Ok(Some((member, got, want))) => Err(format!(
            "{} takes {got} at {member} but {want} on the flat vector",
            q.rule
        )),
        Err(e) => Err(e.to_string()),
    }
}

/// The payment the balance equations force on `⟦base⟧ + ⟅fill⟆`:
/// `f(({i1,i2} ∪ dom base) × {fill}) / (2 + |dom base|)`.
///
/// Both adequacy conditions are verified first.
pub fn lemma1_price(q: &Quintuple) -> Result<Rational> {
    let set = build_adequate_set(q)?;
    if let Some((member, got, want)) = &set.flat_violation {
        return Err(Error::HypothesesFail {
            member: member.to_string(),
            reason: format!("{} takes {got}, flat value is {want}", q.rule),
        });
    }
    if let Err(reason) = check_structure(&set.members, q) {
        return Err(Error::HypothesesFail {
            member: "-".into(),
            reason,
        });
    }
    q.flat_value()?.div_int(2 + q.base.len() as i64)
}

/// One derived entry of the stepwise elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationStep {
    /// Number of non-`b0` bids in the vector that produced this entry.
    pub extras_used: usize,
    pub shape: BidMultiset,
    /// `P(shape) = k · f(b0, …, b0)`.
    pub k: Rational,
    /// The ratio `f(vector) / f(b0, …, b0)` assumed at this step; fixed to 1.
    pub q: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationTrace {
    pub bidders: usize,
    pub steps: Vec<IterationStep>,
}

impl fmt::Display for IterationTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "k_{} = {} @ {}", s.extras_used, s.k, s.shape)?;
        }
        Ok(())
    }
}

/// Derives `P` on `⟅b1, …, bj, b0, …, b0⟆` (N − 1 bids) by elimination, one
/// balance equation per visited vector.
///
/// Starts from the all-`b0` vector and adds extras one at a time. Each
/// vector's equation has every term known except the bag obtained by dropping
/// a `b0`, whose coefficient is the number of `b0` bids. Because the next
/// vector may drop any of the earlier extras, every sub-bag of the extras is
/// visited, smallest first. The rule must take its flat value on every
/// visited vector.
pub fn iterate_table(
    bidders: usize,
    b0: &Rational,
    extras: &[Rational],
    rule: &PriceRule,
) -> Result<(PaymentTable, IterationTrace)> {
    if bidders < 2 {
        return Err(Error::Precondition(format!("need at least 2 bidders, got {bidders}")));
    }
    if extras.len() > bidders - 2 {
        return Err(Error::Precondition(format!(
            "at most {} extra bids fit {bidders} bidders, got {}",
            bidders - 2,
            extras.len()
        )));
    }
    let ids: BidderSet = (1..=bidders as u64).map(BidderId).collect();
    let flat_value = rule.eval(&flat(&ids, b0))?;

    let mut shapes = sub_multisets(&extras.iter().cloned().collect());
    shapes.sort_by_key(BidMultiset::len);

    let mut table = PaymentTable::new();
    let mut ks = PaymentTable::new();
    let mut steps = Vec::new();

    for (step, sub) in shapes.iter().enumerate() {
        let vector: BidVector = sub
            .values()
            .cloned()
            .chain(std::iter::repeat(b0.clone()))
            .zip(1..=bidders as u64)
            .map(|(v, id)| (BidderId(id), v))
            .collect();
        let value = rule.eval(&vector).map_err(|e| Error::Iteration {
            step,
            detail: e.to_string(),
        })?;
        if value != flat_value {
            return Err(Error::Iteration {
                step,
                detail: format!(
                    "{rule} takes {value} at {vector}, flat value is {flat_value}; flat invariance fails"
                ),
            });
        }

        let bag = vector.bag();
        let target = bag.remove_one(b0).expect("vector holds at least two b0 bids");
        if table.contains(&target) {
            // an extra equal to b0 repeats an earlier equation
            continue;
        }
        let mut rest = value.clone();
        let mut k_rest = Rational::one();
        for (x, mult) in bag.counts().filter(|(x, _)| *x != b0) {
            let lower = bag.remove_one(x).expect("x is in the bag");
            let coeff = Rational::integer(mult as i64);
            rest -= &(&coeff * table.get(&lower)?);
            k_rest -= &(&coeff * ks.get(&lower)?);
        }
        let b0_count = bag.multiplicity(b0) as i64;
        let p = rest.div_int(b0_count)?;
        let k = k_rest.div_int(b0_count)?;

        steps.push(IterationStep {
            extras_used: sub.len(),
            shape: target.clone(),
            k: k.clone(),
            q: Rational::one(),
        });
        table.insert(target.clone(), p);
        ks.insert(target, k);
    }

    Ok((table, IterationTrace { bidders, steps }))
}

/// The summed payments of a vector, as forced by adequate sets around it.
#[derive(Clone, Debug)]
pub struct CorollarySum {
    /// `(1/|dom b|) Σ_i f(dom b × {b(j_i)})`, equal to `Σ_i P(⟦b − i⟧)`.
    pub sum: Rational,
    /// `i ↦ f(dom b × {b(j_i)})`.
    pub eta: BTreeMap<BidderId, Rational>,
    /// `i ↦ P(⟦b − i⟧)` as forced by the adequate set for `i`.
    pub payments: BTreeMap<BidderId, Rational>,
    pub sets: BTreeMap<BidderId, AdequateSet>,
}

/// The quintuple whose adequate set pins `P(⟦b − i⟧)` via the partner `j`:
/// `(b − {i, j}, b(j), f, i, j)`.
pub fn partner_quintuple(b: &BidVector, rule: &PriceRule, i: BidderId, j: BidderId) -> Result<Quintuple> {
    let fill = b
        .get(j)
        .ok_or_else(|| Error::Corollary {
            bidder: i.0,
            reason: format!("partner {j} is not a bidder"),
        })?
        .clone();
    if i == j {
        return Err(Error::Corollary {
            bidder: i.0,
            reason: "partner must differ from the bidder".into(),
        });
    }
    Ok(Quintuple::new(b.without(&[i, j].into()), fill, rule.clone(), i, j))
}

pub fn corollary_sum(
    b: &BidVector,
    rule: &PriceRule,
    partners: &BTreeMap<BidderId, BidderId>,
) -> Result<CorollarySum> {
    if b.is_empty() {
        return Err(Error::Precondition("empty bid vector".into()));
    }
    let ids: Vec<BidderId> = b.domain().into_iter().collect();
    let per_bidder = exec::try_map(&ids, |&i| -> Result<_> {
        let j = *partners.get(&i).ok_or_else(|| Error::Corollary {
            bidder: i.0,
            reason: "no partner given".into(),
        })?;
        let q = partner_quintuple(b, rule, i, j)?;
        let set = build_adequate_set(&q).map_err(|e| Error::Corollary {
            bidder: i.0,
            reason: e.to_string(),
        })?;
        let adequacy = check_adequacy(&set.members, &q);
        if let Err(reason) = adequacy.structure.and(adequacy.flat) {
            return Err(Error::Corollary { bidder: i.0, reason });
        }
        let eta = rule.eval(&flat(&b.domain(), &q.fill))?;
        let payment = lemma1_price(&q).map_err(|e| Error::Corollary {
            bidder: i.0,
            reason: e.to_string(),
        })?;
        Ok((i, eta, payment, set))
    })?;

    let mut out = CorollarySum {
        sum: Rational::zero(),
        eta: BTreeMap::new(),
        payments: BTreeMap::new(),
        sets: BTreeMap::new(),
    };
    for (i, eta, payment, set) in per_bidder {
        out.sum += &eta;
        out.eta.insert(i, eta);
        out.payments.insert(i, payment);
        out.sets.insert(i, set);
    }
    out.sum = out.sum.div_int(b.len() as i64)?;
    Ok(out)
}
