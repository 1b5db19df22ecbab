//! Bid vectors, bags of bids, and the restriction/completion machinery.
//!
//! A [`BidVector`] is a finite function from bidders to bids, compared
//! extensionally on its graph. A [`BidMultiset`] is the bag of values a vector
//! takes. All enumerations here are deterministic so that witness sets and
//! linear systems built from them are reproducible byte for byte.
//!
//! Sub-multiset enumeration is exponential in the number of distinct values.
//! The intended scale is vectors with at most ten or so bidders.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct BidderId(pub u64);

impl fmt::Display for BidderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for BidderId {
    fn from(id: u64) -> Self {
        BidderId(id)
    }
}

pub type BidderSet = BTreeSet<BidderId>;

/// Collects plain integers into a bidder set.
pub fn bidders(ids: impl IntoIterator<Item = u64>) -> BidderSet {
    ids.into_iter().map(BidderId).collect()
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BidVector {
    entries: BTreeMap<BidderId, Rational>,
}

impl BidVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (u64, V)>,
        V: Into<Rational>,
    {
        BidVector {
            entries: pairs
                .into_iter()
                .map(|(id, v)| (BidderId(id), v.into()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: BidderId) -> Option<&Rational> {
        self.entries.get(&id)
    }

    pub fn insert(&mut self, id: BidderId, bid: Rational) -> Option<Rational> {
        self.entries.insert(id, bid)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BidderId, &Rational)> + '_ {
        self.entries.iter().map(|(id, v)| (*id, v))
    }

    pub fn domain(&self) -> BidderSet {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, id: BidderId) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn max_id(&self) -> Option<BidderId> {
        self.entries.keys().next_back().copied()
    }

    pub fn max_bid(&self) -> Option<&Rational> {
        self.entries.values().max()
    }

    /// The bag of bids, `⟦b⟧`.
    pub fn bag(&self) -> BidMultiset {
        self.entries.values().cloned().collect()
    }

    /// Restriction to `dom b \ ids`. Ids absent from the domain are ignored.
    pub fn without(&self, ids: &BidderSet) -> BidVector {
        BidVector {
            entries: self
                .entries
                .iter()
                .filter(|(id, _)| !ids.contains(id))
                .map(|(id, v)| (*id, v.clone()))
                .collect(),
        }
    }

    pub fn without_one(&self, id: BidderId) -> BidVector {
        let mut out = self.clone();
        out.entries.remove(&id);
        out
    }

    /// The bidders whose bid lies in `values`.
    pub fn preimage(&self, values: &BTreeSet<Rational>) -> BidderSet {
        self.entries
            .iter()
            .filter(|(_, v)| values.contains(v))
            .map(|(id, _)| *id)
            .collect()
    }

    /// True when `self ⊆ other` as graphs.
    pub fn is_subfunction_of(&self, other: &BidVector) -> bool {
        self.entries
            .iter()
            .all(|(id, v)| other.entries.get(id) == Some(v))
    }

    /// Applies a bidder relabeling. Ids missing from `perm` are kept.
    pub fn relabel(&self, perm: &BTreeMap<BidderId, BidderId>) -> BidVector {
        BidVector {
            entries: self
                .entries
                .iter()
                .map(|(id, v)| (*perm.get(id).unwrap_or(id), v.clone()))
                .collect(),
        }
    }

    /// Disjoint union of two graphs.
    pub fn union(&self, other: &BidVector) -> Result<BidVector> {
        let mut out = self.clone();
        for (id, v) in &other.entries {
            if out.entries.insert(*id, v.clone()).is_some() {
                return Err(Error::DomainClash(id.0));
            }
        }
        Ok(out)
    }
}

impl FromIterator<(BidderId, Rational)> for BidVector {
    fn from_iter<T: IntoIterator<Item = (BidderId, Rational)>>(iter: T) -> Self {
        BidVector {
            entries: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for BidVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (id, v)) in self.entries.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{id}:{v}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for BidVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// The constant vector `ids × {value}`.
pub fn flat(ids: &BidderSet, value: &Rational) -> BidVector {
    ids.iter().map(|id| (*id, value.clone())).collect()
}

/// `pairs ⇀ family`: the union of `pairs` with each member of `family`.
pub fn extend(pairs: &BidVector, family: &BTreeSet<BidVector>) -> Result<BTreeSet<BidVector>> {
    family.iter().map(|y| pairs.union(y)).collect()
}

// JSON: {"bids": {"<id>": "<p/q>", ...}}, ids in numeric order.
impl Serialize for BidVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Bids<'a>(&'a BTreeMap<BidderId, Rational>);
        impl Serialize for Bids<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.len()))?;
                for (id, v) in self.0 {
                    map.serialize_entry(&id.0.to_string(), v)?;
                }
                map.end()
            }
        }
        let mut outer = serializer.serialize_map(Some(1))?;
        outer.serialize_entry("bids", &Bids(&self.entries))?;
        outer.end()
    }
}

impl<'de> Deserialize<'de> for BidVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            bids: RawBids,
        }

        struct RawBids(BTreeMap<BidderId, Rational>);

        impl<'de> Deserialize<'de> for RawBids {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = RawBids;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        f.write_str("a map from bidder id to rational bid")
                    }
                    fn visit_map<A: MapAccess<'de>>(
                        self,
                        mut access: A,
                    ) -> std::result::Result<RawBids, A::Error> {
                        let mut out = BTreeMap::new();
                        while let Some((k, v)) = access.next_entry::<String, Rational>()? {
                            let id: u64 = k.parse().map_err(|_| {
                                serde::de::Error::custom(format!("bad bidder id {k:?}"))
                            })?;
                            if out.insert(BidderId(id), v).is_some() {
                                return Err(serde::de::Error::custom(format!(
                                    "duplicate bidder id {id}"
                                )));
                            }
                        }
                        Ok(RawBids(out))
                    }
                }
                d.deserialize_map(V)
            }
        }

        let wire = Wire::deserialize(deserializer)?;
        Ok(BidVector {
            entries: wire.bids.0,
        })
    }
}

/// A bag of bids with multiplicities. Every stored multiplicity is at least 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BidMultiset {
    counts: BTreeMap<Rational, usize>,
}

impl BidMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<I, V>(values: I) -> Self
    where
        I: IntoIterator<Item = V>,
        V: Into<Rational>,
    {
        values.into_iter().map(Into::into).collect()
    }

    pub fn len(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn multiplicity(&self, value: &Rational) -> usize {
        self.counts.get(value).copied().unwrap_or(0)
    }

    /// Distinct values with their multiplicities, ascending.
    pub fn counts(&self) -> impl Iterator<Item = (&Rational, usize)> + '_ {
        self.counts.iter().map(|(v, c)| (v, *c))
    }

    /// All values ascending, repeated by multiplicity.
    pub fn values(&self) -> impl Iterator<Item = &Rational> + '_ {
        self.counts
            .iter()
            .flat_map(|(v, c)| std::iter::repeat_n(v, *c))
    }

    pub fn add_copies(&mut self, value: Rational, copies: usize) {
        if copies > 0 {
            *self.counts.entry(value).or_insert(0) += copies;
        }
    }

    /// Multiset union `self + other`.
    pub fn sum(&self, other: &BidMultiset) -> BidMultiset {
        let mut out = self.clone();
        for (v, c) in &other.counts {
            out.add_copies(v.clone(), *c);
        }
        out
    }

    pub fn with_copies(&self, value: &Rational, copies: usize) -> BidMultiset {
        let mut out = self.clone();
        out.add_copies(value.clone(), copies);
        out
    }

    /// Removes one occurrence of `value`; `None` if absent.
    pub fn remove_one(&self, value: &Rational) -> Option<BidMultiset> {
        let mut out = self.clone();
        let c = out.counts.get_mut(value)?;
        *c -= 1;
        if *c == 0 {
            out.counts.remove(value);
        }
        Some(out)
    }

    /// `self ≤ other`.
    pub fn is_sub_multiset_of(&self, other: &BidMultiset) -> bool {
        self.counts.iter().all(|(v, c)| other.multiplicity(v) >= *c)
    }

    pub fn max_value(&self) -> Option<&Rational> {
        self.counts.keys().next_back()
    }
}

impl FromIterator<Rational> for BidMultiset {
    fn from_iter<T: IntoIterator<Item = Rational>>(iter: T) -> Self {
        let mut out = BidMultiset::new();
        for v in iter {
            out.add_copies(v, 1);
        }
        out
    }
}

impl fmt::Display for BidMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟅")?;
        for (k, v) in self.values().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "⟆")
    }
}

impl fmt::Debug for BidMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// JSON: ascending array of "p/q" strings with repetition.
impl Serialize for BidMultiset {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.values())
    }
}

impl<'de> Deserialize<'de> for BidMultiset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<Rational>::deserialize(deserializer)?;
        Ok(values.into_iter().collect())
    }
}

/// Every `m' ≤ m`, each once.
///
/// The order is a mixed-radix count over the distinct values of `m`, with the
/// smallest value as the fastest digit: `⟅1,1,2⟆` yields `⟅⟆, ⟅1⟆, ⟅1,1⟆,
/// ⟅2⟆, ⟅1,2⟆, ⟅1,1,2⟆`.
pub fn sub_multisets(m: &BidMultiset) -> Vec<BidMultiset> {
    let distinct: Vec<(&Rational, usize)> = m.counts().collect();
    let total: usize = distinct.iter().map(|(_, c)| c + 1).product();
    let mut digits = vec![0usize; distinct.len()];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        let mut sub = BidMultiset::new();
        for ((v, _), d) in distinct.iter().zip(&digits) {
            sub.add_copies((*v).clone(), *d);
        }
        out.push(sub);
        for (k, (_, c)) in distinct.iter().enumerate() {
            if digits[k] < *c {
                digits[k] += 1;
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// Ids of `b` grouped by bid value, each group ascending.
fn ids_by_value(b: &BidVector) -> BTreeMap<&Rational, Vec<BidderId>> {
    let mut groups: BTreeMap<&Rational, Vec<BidderId>> = BTreeMap::new();
    for (id, v) in b.iter() {
        groups.entry(v).or_default().push(id);
    }
    groups
}

fn combinations(pool: &[BidderId], k: usize) -> Vec<Vec<BidderId>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if pool.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, head) in pool.iter().enumerate() {
        for mut tail in combinations(&pool[i + 1..], k - 1) {
            tail.insert(0, *head);
            out.push(tail);
        }
    }
    out
}

/// Every `b' ⊆ b` with `⟦b'⟧ = m`, ordered by the sorted tuple of their ids.
/// Empty when `m` is not a sub-multiset of `⟦b⟧`.
pub fn restrictions(b: &BidVector, m: &BidMultiset) -> Vec<BidVector> {
    let groups = ids_by_value(b);
    let mut choices: Vec<Vec<BidderId>> = vec![Vec::new()];
    for (v, k) in m.counts() {
        let pool = groups.get(v).map(Vec::as_slice).unwrap_or(&[]);
        let picks = combinations(pool, k);
        if picks.is_empty() {
            return Vec::new();
        }
        choices = choices
            .iter()
            .flat_map(|prefix| {
                picks.iter().map(move |p| {
                    let mut ids = prefix.clone();
                    ids.extend_from_slice(p);
                    ids
                })
            })
            .collect();
    }
    for ids in &mut choices {
        ids.sort();
    }
    choices.sort();
    choices
        .into_iter()
        .map(|ids| {
            ids.into_iter()
                .map(|id| (id, b.get(id).expect("id from b").clone()))
                .collect()
        })
        .collect()
}

/// The canonical m-restriction: for each value, the smallest ids bidding it.
/// This is the lexicographically smallest id tuple, i.e. `restrictions(b, m)[0]`.
fn canonical_restriction(b: &BidVector, m: &BidMultiset) -> Result<BidVector> {
    let groups = ids_by_value(b);
    let mut out = BidVector::new();
    for (v, k) in m.counts() {
        let pool = groups.get(v).map(Vec::as_slice).unwrap_or(&[]);
        if pool.len() < k {
            return Err(Error::NotSubMultiset {
                sub: m.to_string(),
                sup: b.bag().to_string(),
            });
        }
        for id in &pool[..k] {
            out.insert(*id, v.clone());
        }
    }
    Ok(out)
}

/// The canonical m-completion of `b` to `fill`: keep the canonical
/// m-restriction, set every other bidder to `fill`.
pub fn completion(b: &BidVector, m: &BidMultiset, fill: &Rational) -> Result<BidVector> {
    let kept = canonical_restriction(b, m)?;
    Ok(b.iter()
        .map(|(id, _)| {
            let v = kept.get(id).cloned().unwrap_or_else(|| fill.clone());
            (id, v)
        })
        .collect())
}

/// True when `candidate` is some m-completion of `base` to `fill`.
pub fn is_completion(
    base: &BidVector,
    m: &BidMultiset,
    fill: &Rational,
    candidate: &BidVector,
) -> bool {
    completion_shapes(base, fill, candidate).is_some_and(|(required, optional)| {
        // m = required + t·fill for some 0 ≤ t ≤ optional
        (0..=optional).any(|t| &required.with_copies(fill, t) == m)
    })
}

/// For a vector `y` on `dom base`, describes every `m` for which `y` is an
/// m-completion of `base` to `fill`: these are `required + t·⟅fill⟆` for
/// `0 ≤ t ≤ optional`. `None` if `y` is no completion at all.
pub(crate) fn completion_shapes(
    base: &BidVector,
    fill: &Rational,
    y: &BidVector,
) -> Option<(BidMultiset, usize)> {
    if base.domain() != y.domain() {
        return None;
    }
    let mut required = BidMultiset::new();
    let mut optional = 0;
    for (id, v) in base.iter() {
        let yv = y.get(id)?;
        match (yv == v, yv == fill) {
            (true, true) => optional += 1,
            (true, false) => required.add_copies(v.clone(), 1),
            (false, true) => {}
            (false, false) => return None,
        }
    }
    Some((required, optional))
}

/// One m-completion of `base` to `fill` for every `m ≤ ⟦base⟧`, indexed by `m`
/// in [`sub_multisets`] order. Distinct `m` may yield equal graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullFamily {
    pub base: BidVector,
    pub fill: Rational,
    pub members: Vec<(BidMultiset, BidVector)>,
}

impl FullFamily {
    /// The family as a set of graphs, duplicates merged.
    pub fn member_set(&self) -> BTreeSet<BidVector> {
        self.members.iter().map(|(_, y)| y.clone()).collect()
    }
}

pub fn full_family(base: &BidVector, fill: &Rational) -> FullFamily {
    let subs = sub_multisets(&base.bag());
    let members = exec::map(&subs, |m| {
        let y = completion(base, m, fill).expect("m ranges over sub-multisets of the bag");
        (m.clone(), y)
    });
    FullFamily {
        base: base.clone(),
        fill: fill.clone(),
        members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64) -> Rational {
        Rational::integer(n)
    }

    fn bv(pairs: &[(u64, i64)]) -> BidVector {
        BidVector::from_pairs(pairs.iter().map(|&(i, v)| (i, v)))
    }

    fn ms(values: &[i64]) -> BidMultiset {
        BidMultiset::from_values(values.iter().copied())
    }

    #[test]
    fn bag_counts_multiplicity() {
        assert_eq!(bv(&[(1, 10), (2, 20), (3, 10)]).bag(), ms(&[10, 10, 20]));
        assert_eq!(BidVector::new().bag(), BidMultiset::new());
        let half = Rational::new(1, 2).unwrap();
        let single = BidVector::from_pairs([(7, half.clone())]);
        assert_eq!(single.bag(), BidMultiset::from_values([half]));
    }

    #[test]
    fn remove_ids() {
        let b = bv(&[(1, 1), (2, 2), (3, 4)]);
        assert_eq!(b.without(&bidders([3])), bv(&[(1, 1), (2, 2)]));
        assert_eq!(b.without(&bidders([2, 3])), bv(&[(1, 1)]));
        assert_eq!(bv(&[(1, 1)]).without(&bidders([9])), bv(&[(1, 1)]));
    }

    #[test]
    fn preimage_scans_values() {
        let b = bv(&[(1, 1), (2, 2), (3, 4)]);
        let vals: BTreeSet<Rational> = [q(2), q(4)].into();
        assert_eq!(b.preimage(&vals), bidders([2, 3]));
        assert!(b.preimage(&BTreeSet::new()).is_empty());
        let vals: BTreeSet<Rational> = [q(5)].into();
        assert_eq!(bv(&[(1, 5), (2, 5)]).preimage(&vals), bidders([1, 2]));
    }

    #[test]
    fn flat_vectors() {
        assert_eq!(flat(&bidders([1, 2, 3]), &q(4)), bv(&[(1, 4), (2, 4), (3, 4)]));
        assert!(flat(&BidderSet::new(), &q(9)).is_empty());
        let v = Rational::new(-1, 2).unwrap();
        assert_eq!(flat(&bidders([5]), &v), BidVector::from_pairs([(5, v.clone())]));
    }

    #[test]
    fn sub_multiset_order() {
        let subs = sub_multisets(&ms(&[1, 1, 2]));
        let want = vec![ms(&[]), ms(&[1]), ms(&[1, 1]), ms(&[2]), ms(&[1, 2]), ms(&[1, 1, 2])];
        assert_eq!(subs, want);
        assert_eq!(sub_multisets(&ms(&[])), vec![ms(&[])]);
        assert_eq!(sub_multisets(&ms(&[5, 5])), vec![ms(&[]), ms(&[5]), ms(&[5, 5])]);
    }

    #[test]
    fn restriction_enumeration() {
        let b = bv(&[(1, 10), (2, 10), (3, 20)]);
        assert_eq!(restrictions(&b, &ms(&[10])), vec![bv(&[(1, 10)]), bv(&[(2, 10)])]);
        assert_eq!(restrictions(&b, &b.bag()), vec![b.clone()]);
        assert_eq!(restrictions(&b, &ms(&[])), vec![BidVector::new()]);
        assert!(restrictions(&b, &ms(&[30])).is_empty());
        assert!(restrictions(&b, &ms(&[20, 20])).is_empty());
    }

    #[test]
    fn completions() {
        let b = bv(&[(1, 10), (2, 20)]);
        assert_eq!(completion(&b, &ms(&[20]), &q(7)).unwrap(), bv(&[(1, 7), (2, 20)]));
        assert_eq!(completion(&b, &b.bag(), &q(99)).unwrap(), b);
        assert_eq!(completion(&b, &ms(&[]), &q(3)).unwrap(), flat(&b.domain(), &q(3)));
        let err = completion(&b, &ms(&[30]), &q(3)).unwrap_err();
        assert!(err.to_string().contains("not a sub-multiset"), "{err}");
    }

    #[test]
    fn full_families() {
        let fam = full_family(&bv(&[(1, 1), (2, 2)]), &q(9));
        let want: BTreeSet<BidVector> = [
            bv(&[(1, 9), (2, 9)]),
            bv(&[(1, 1), (2, 9)]),
            bv(&[(1, 9), (2, 2)]),
            bv(&[(1, 1), (2, 2)]),
        ]
        .into();
        assert_eq!(fam.members.len(), 4);
        assert_eq!(fam.member_set(), want);

        let fam = full_family(&BidVector::new(), &q(9));
        assert_eq!(fam.member_set(), [BidVector::new()].into());

        let fam = full_family(&bv(&[(3, 5)]), &q(5));
        assert_eq!(fam.members.len(), 2);
        assert_eq!(fam.member_set(), [bv(&[(3, 5)])].into());
    }

    #[test]
    fn extend_unions_each_member() {
        let pairs = bv(&[(5, 9), (6, 9)]);
        let family: BTreeSet<BidVector> = [bv(&[(1, 1)]), bv(&[(1, 9)])].into();
        let want: BTreeSet<BidVector> =
            [bv(&[(1, 1), (5, 9), (6, 9)]), bv(&[(1, 9), (5, 9), (6, 9)])].into();
        assert_eq!(extend(&pairs, &family).unwrap(), want);
        assert_eq!(extend(&BidVector::new(), &family).unwrap(), family);
        assert!(extend(&bv(&[(5, 9)]), &BTreeSet::new()).unwrap().is_empty());
        let err = extend(&bv(&[(1, 3)]), &family).unwrap_err();
        assert!(err.to_string().contains("⇀ domain clash"), "{err}");
    }

    #[test]
    fn completion_shapes_cover_ties_with_fill() {
        // base value 5 equals the fill, so that bidder is optional
        let base = bv(&[(1, 5), (2, 3)]);
        let y = bv(&[(1, 5), (2, 3)]);
        assert!(is_completion(&base, &ms(&[3]), &q(5), &y));
        assert!(is_completion(&base, &ms(&[3, 5]), &q(5), &y));
        assert!(!is_completion(&base, &ms(&[]), &q(5), &y));
        assert!(!is_completion(&base, &ms(&[3]), &q(5), &bv(&[(1, 4), (2, 3)])));
    }

    #[test]
    fn json_encodings() {
        let b = BidVector::from_pairs([(2, q(2)), (10, Rational::new(-5, 4).unwrap())]);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"bids":{"2":"2","10":"-5/4"}}"#);
        assert_eq!(serde_json::from_str::<BidVector>(&s).unwrap(), b);
        assert!(serde_json::from_str::<BidVector>(r#"{"bids":{"x":"1"}}"#).is_err());

        let m = ms(&[4, 1, 4]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"["1","4","4"]"#);
        assert_eq!(serde_json::from_str::<BidMultiset>(&s).unwrap(), m);
    }

    fn arb_vector() -> impl Strategy<Value = BidVector> {
        prop::collection::btree_map(0u64..12, 1i64..5, 0..7)
            .prop_map(BidVector::from_pairs)
    }

    proptest! {
        #[test]
        fn completion_bag_is_m_plus_fill(b in arb_vector(), fill in 1i64..6, pick in any::<prop::sample::Index>()) {
            let subs = sub_multisets(&b.bag());
            let m = pick.get(&subs);
            let c = completion(&b, m, &q(fill)).unwrap();
            prop_assert_eq!(c.domain(), b.domain());
            prop_assert_eq!(c.bag(), m.with_copies(&q(fill), b.len() - m.len()));
            let first = restrictions(&b, m).into_iter().next().map(|r| {
                let rest: BidderSet = b.domain().difference(&r.domain()).copied().collect();
                r.union(&flat(&rest, &q(fill))).unwrap()
            });
            prop_assert_eq!(Some(c), first);
        }

        #[test]
        fn sub_multiset_count_is_product(b in arb_vector()) {
            let m = b.bag();
            let subs = sub_multisets(&m);
            let want: usize = m.counts().map(|(_, c)| c + 1).product();
            prop_assert_eq!(subs.len(), want);
            let distinct: BTreeSet<_> = subs.iter().cloned().collect();
            prop_assert_eq!(distinct.len(), want);
            prop_assert!(subs.iter().all(|s| s.is_sub_multiset_of(&m)));
        }

        #[test]
        fn family_members_share_domain(b in arb_vector(), fill in 1i64..6) {
            let fam = full_family(&b, &q(fill));
            prop_assert!(fam.members.iter().all(|(m, y)| y.domain() == b.domain() && is_completion(&b, m, &q(fill), y)));
        }

        #[test]
        fn flat_bag_is_constant(ids in prop::collection::btree_set(0u64..50, 0..8), v in -5i64..5) {
            let ids: BidderSet = ids.into_iter().map(BidderId).collect();
            prop_assert_eq!(flat(&ids, &q(v)).bag(), BidMultiset::new().with_copies(&q(v), ids.len()));
        }

        #[test]
        fn extend_never_grows(fill in 1i64..5, b in arb_vector()) {
            let fam = full_family(&b, &q(fill)).member_set();
            let fresh = b.max_id().map_or(0, |m| m.0 + 1);
            let pairs = flat(&bidders([fresh, fresh + 1]), &q(fill));
            let ext = extend(&pairs, &fam).unwrap();
            prop_assert_eq!(ext.len(), fam.len());
            prop_assert!(extend(&BidVector::new(), &fam).unwrap().len() <= fam.len());
        }
    }
}
