//! Balance constraints as an exact linear system in the unknown payments.
//!
//! Each bid vector `b` contributes the row `Σ_i P(⟦b − i⟧) = f(b)`. Exact
//! Gauss-Jordan elimination either finds an assignment or a certificate:
//! multipliers `y` with `yᵀA = 0` and `yᵀc ≠ 0`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::arith::Rational;
use crate::bids::{BidMultiset, BidVector};
use crate::error::{Error, Result};
use crate::exec;
use crate::payments::PaymentTable;
use crate::rules::PriceRule;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    /// Variable index to coefficient; zero coefficients are never stored.
    pub coeffs: BTreeMap<usize, Rational>,
    pub rhs: Rational,
    #[serde(default)]
    pub origin: BidVector,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub variables: Vec<BidMultiset>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub multipliers: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    /// One solution, free variables set to zero.
    pub assignment: PaymentTable,
    /// Variables that take the same value in every solution.
    pub pinned: PaymentTable,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Feasible(Solution),
    Infeasible(Certificate),
}

impl Outcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Outcome::Feasible(_))
    }
}

impl LinearSystem {
    /// Parses the JSON form and checks every coefficient index.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut sys: LinearSystem = serde_json::from_str(text)?;
        let n = sys.variables.len();
        for (r, row) in sys.rows.iter_mut().enumerate() {
            if let Some(&bad) = row.coeffs.keys().find(|&&k| k >= n) {
                return Err(Error::Json(format!(
                    "row {r} references variable {bad}, but only {n} variables exist"
                )));
            }
            row.coeffs.retain(|_, c| !c.is_zero());
        }
        Ok(sys)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system serializes")
    }

    pub fn index_of(&self, m: &BidMultiset) -> Option<usize> {
        self.variables.iter().position(|v| v == m)
    }

    /// True when `table` satisfies every row exactly. Variables missing from
    /// the table make the check fail.
    pub fn is_satisfied_by(&self, table: &PaymentTable) -> bool {
        self.rows.iter().all(|row| {
            let lhs: Option<Rational> = row
                .coeffs
                .iter()
                .map(|(&k, c)| table.get(&self.variables[k]).ok().map(|p| c * p))
                .sum();
            lhs.as_ref() == Some(&row.rhs)
        })
    }
}

/// One row per member of `set`, in iteration order.
pub fn build_balance_system<'a>(
    set: impl IntoIterator<Item = &'a BidVector>,
    rule: &PriceRule,
) -> Result<LinearSystem> {
    let members: Vec<&BidVector> = set.into_iter().collect();
    let raw = exec::try_map(&members, |b| -> Result<_> {
        if b.is_empty() {
            return Err(Error::Precondition("balance row for an empty bid vector".into()));
        }
        let rhs = rule.eval(b).map_err(|e| {
            Error::Precondition(format!("rule {rule} cannot be evaluated at {b}: {e}"))
        })?;
        let mut counts: BTreeMap<BidMultiset, i64> = BTreeMap::new();
        for (id, _) in b.iter() {
            *counts.entry(b.without_one(id).bag()).or_insert(0) += 1;
        }
        Ok((counts, rhs))
    })?;

    let variables: Vec<BidMultiset> = raw
        .iter()
        .flat_map(|(counts, _)| counts.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&BidMultiset, usize> =
        variables.iter().enumerate().map(|(k, m)| (m, k)).collect();

    let rows = raw
        .iter()
        .zip(&members)
        .map(|((counts, rhs), b)| Row {
            coeffs: counts
                .iter()
                .map(|(m, c)| (index[m], Rational::integer(*c)))
                .collect(),
            rhs: rhs.clone(),
            origin: (*b).clone(),
        })
        .collect();

    Ok(LinearSystem { variables, rows })
}

type Sparse = BTreeMap<usize, Rational>;

/// `target -= factor · source`, dropping entries that cancel.
fn axpy(target: &mut Sparse, factor: &Rational, source: &Sparse) {
    for (&k, v) in source {
        let delta = factor * v;
        match target.get_mut(&k) {
            Some(t) => {
                *t -= &delta;
                if t.is_zero() {
                    target.remove(&k);
                }
            }
            None => {
                target.insert(k, -delta);
            }
        }
    }
}

struct WorkRow {
    coeffs: Sparse,
    rhs: Rational,
    /// This row as a combination of the original rows.
    combo: Sparse,
}

/// Gauss-Jordan elimination over the rationals. Pivots are taken in variable
/// order, on the first unused row with a nonzero entry.
pub fn solve_or_refute(sys: &LinearSystem) -> Outcome {
    let mut rows: Vec<WorkRow> = sys
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| WorkRow {
            coeffs: row.coeffs.iter().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (*k, c.clone())).collect(),
            rhs: row.rhs.clone(),
            combo: [(r, Rational::one())].into(),
        })
        .collect();

    let mut pivot_of_var: BTreeMap<usize, usize> = BTreeMap::new();
    let mut used = vec![false; rows.len()];

    for var in 0..sys.variables.len() {
        let Some(p) = (0..rows.len()).find(|&r| !used[r] && rows[r].coeffs.contains_key(&var)) else {
            continue;
        };
        used[p] = true;
        pivot_of_var.insert(var, p);

        let inv = rows[p].coeffs[&var].recip().expect("pivot is nonzero");
        let pivot = &mut rows[p];
        for v in pivot.coeffs.values_mut() {
            *v = &*v * &inv;
        }
        for v in pivot.combo.values_mut() {
            *v = &*v * &inv;
        }
        pivot.rhs = &pivot.rhs * &inv;

        let (pc, pr, pcombo) = (pivot.coeffs.clone(), pivot.rhs.clone(), pivot.combo.clone());
        for (r, row) in rows.iter_mut().enumerate() {
            if r == p {
                continue;
            }
            let Some(factor) = row.coeffs.get(&var).cloned() else {
                continue;
            };
            axpy(&mut row.coeffs, &factor, &pc);
            axpy(&mut row.combo, &factor, &pcombo);
            row.rhs -= &(&factor * &pr);
        }
    }

    if let Some(bad) = rows.iter().find(|row| row.coeffs.is_empty() && !row.rhs.is_zero()) {
        let mut multipliers = vec![Rational::zero(); sys.rows.len()];
        for (&r, y) in &bad.combo {
            multipliers[r] = y.clone();
        }
        return Outcome::Infeasible(Certificate { multipliers });
    }

    let mut assignment = PaymentTable::new();
    let mut pinned = PaymentTable::new();
    for (k, m) in sys.variables.iter().enumerate() {
        match pivot_of_var.get(&k) {
            Some(&p) => {
                assignment.insert(m.clone(), rows[p].rhs.clone());
                if rows[p].coeffs.len() == 1 {
                    pinned.insert(m.clone(), rows[p].rhs.clone());
                }
            }
            None => {
                assignment.insert(m.clone(), Rational::zero());
            }
        }
    }
    Outcome::Feasible(Solution { assignment, pinned })
}

/// Exact check of `Σ_r y_r·A_r = 0` and `Σ_r y_r·c_r ≠ 0`.
pub fn verify_certificate(sys: &LinearSystem, cert: &Certificate) -> Result<bool> {
    if cert.multipliers.len() != sys.rows.len() {
        return Err(Error::LengthMismatch {
            expected: sys.rows.len(),
            got: cert.multipliers.len(),
        });
    }
    let mut combined: Sparse = BTreeMap::new();
    let mut rhs = Rational::zero();
    for (row, y) in sys.rows.iter().zip(&cert.multipliers) {
        if y.is_zero() {
            continue;
        }
        axpy(&mut combined, &-y, &row.coeffs);
        rhs += &(y * &row.rhs);
    }
    Ok(combined.is_empty() && !rhs.is_zero())
}
