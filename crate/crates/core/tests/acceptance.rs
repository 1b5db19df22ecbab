//! Acceptance criteria. Every comparison is exact rational equality.
//!
//! Runs without the libtest harness so that the PASS/FAIL line of every
//! criterion is always printed: `cargo test -p imbalance-core --test acceptance`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use imbalance_core::bids::{bidders, flat, BidVector, BidderId};
use imbalance_core::feasibility::{build_balance_system, solve_or_refute, verify_certificate, Outcome};
use imbalance_core::payments::{
    build_adequate_set, check_adequacy, is_adequate, iterate_table, lemma1_price, Quintuple,
};
use imbalance_core::rules::PriceRule;
use imbalance_core::witness::{
    is_counterexample, lemma3_check, vickrey_theorem, vickrey_triple, vickrey_witness_set,
    CounterexampleTriple, Tag,
};
use imbalance_core::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: &str, name: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {id} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn q(n: i64) -> Rational {
    Rational::integer(n)
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d).unwrap()
}

fn random_rational(rng: &mut (impl Rng + ?Sized)) -> Rational {
    r(rng.gen_range(-20..=20), rng.gen_range(1..=6))
}

fn random_vector(rng: &mut impl Rng, len: usize) -> BidVector {
    BidVector::from_pairs((0..len).map(|k| (k as u64 + 1, random_rational(rng))))
}

fn ac1_vickrey_theorem_instances() {
    let mut failures = Vec::new();
    for n in 1..=5u64 {
        let start = Instant::now();
        let report_n = vickrey_theorem(n).unwrap();
        let elapsed = start.elapsed();
        let want = r(n as i64 + 1, n as i64 + 2);
        let diff = match (&report_n.lhs, &report_n.rhs) {
            (Some(l), Some(r)) => Some(l - r),
            _ => None,
        };
        let ok = report_n.hypotheses_met
            && report_n.holds
            && diff.as_ref() == Some(&want)
            && elapsed < Duration::from_secs(1);
        if !ok {
            failures.push(format!("n={n}: diff={diff:?} want={want} in {elapsed:?}"));
        }
        println!(
            "    n={n}: {} lhs-rhs={} ({} hypotheses, {:?})",
            report_n.summary(),
            diff.map(|d| d.to_string()).unwrap_or_default(),
            report_n.hypothesis_log.len(),
            elapsed
        );
    }
    report(
        "AC1",
        "Vickrey theorem instances n=1..5",
        failures.is_empty(),
        &format!("lhs - rhs = (n+1)/(n+2); failures: {failures:?}"),
    );
    assert!(failures.is_empty());
}

fn ac2_closed_form_payment() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = Vec::new();
    for _ in 0..200 {
        let len = rng.gen_range(0..=6);
        let base = random_vector(&mut rng, len);
        let slack = r(rng.gen_range(0..=5), rng.gen_range(1..=3));
        let b0 = match base.max_bid() {
            Some(m) if rng.gen_bool(0.2) => m.clone(),
            Some(m) => m + &slack,
            None => random_rational(&mut rng),
        };
        let fresh = base.max_id().map_or(1, |m| m.0 + 1);
        let qt = Quintuple::new(base.clone(), b0.clone(), PriceRule::NegSecondPrice, fresh, fresh + 1);
        let got = lemma1_price(&qt).unwrap();
        let want = (-&b0).div_int(2 + len as i64).unwrap();
        if got != want {
            bad.push(format!("{base} b0={b0}: {got} != {want}"));
        }
    }
    report("AC2", "closed-form payment -b0/(2+|dom|)", bad.is_empty(), &format!("200 bases, mismatches: {bad:?}"));
    assert!(bad.is_empty());
}

fn ac3_iteration_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    let mut checked = 0;
    for bidders_n in 2..=6usize {
        for _ in 0..20 {
            let k = rng.gen_range(0..=bidders_n - 2);
            let b0 = r(rng.gen_range(0..=30), rng.gen_range(1..=4));
            let extras: Vec<Rational> = (0..k)
                .map(|_| &b0 - &r(rng.gen_range(0..=15), rng.gen_range(1..=4)))
                .collect();
            let (table, trace) = iterate_table(bidders_n, &b0, &extras, &PriceRule::NegSecondPrice).unwrap();
            assert!(trace.steps.iter().all(|s| s.k == r(1, bidders_n as i64)));
            for (shape, value) in table.iter() {
                // shape = ⟦base⟧ + ⟅b0⟆ with |dom base| = N − 2
                let base_bag = shape.remove_one(&b0).unwrap();
                let base = BidVector::from_pairs(base_bag.values().cloned().enumerate().map(|(k, v)| (k as u64 + 1, v)));
                let qt = Quintuple::new(base, b0.clone(), PriceRule::NegSecondPrice, bidders_n as u64 - 1, bidders_n as u64);
                let closed = lemma1_price(&qt).unwrap();
                checked += 1;
                if &closed != value {
                    bad.push(format!("N={bidders_n} {shape}: {value} != {closed}"));
                }
            }
        }
    }
    report(
        "AC3",
        "iterative table equals closed form, N<=6",
        bad.is_empty(),
        &format!("{checked} entries, mismatches: {bad:?}"),
    );
    assert!(bad.is_empty());
}

fn ac4_feasibility_refutation() {
    let mut failures = Vec::new();
    for n in 1..=4u64 {
        let start = Instant::now();
        let x = vickrey_witness_set(n).unwrap();
        let sys = build_balance_system(&x, &PriceRule::NegSecondPrice).unwrap();
        let outcome = solve_or_refute(&sys);
        let verified = match &outcome {
            Outcome::Infeasible(cert) => verify_certificate(&sys, cert).unwrap(),
            Outcome::Feasible(_) => false,
        };
        let elapsed = start.elapsed();
        println!(
            "    n={n}: {} vectors, {} unknowns, certificate verified: {verified} ({elapsed:?})",
            sys.rows.len(),
            sys.variables.len()
        );
        if !verified || elapsed >= Duration::from_secs(5) {
            failures.push(n);
        }
    }
    report(
        "AC4",
        "witness sets refute balance, n=1..4",
        failures.is_empty(),
        &format!("failing n: {failures:?}"),
    );
    assert!(failures.is_empty());
}

fn ac5_positive_control() {
    let mut failures = Vec::new();
    for n in 1..=4u64 {
        let x = vickrey_witness_set(n).unwrap();
        for c in [q(0), r(7, 3), q(-2)] {
            let sys = build_balance_system(&x, &PriceRule::Constant(c.clone())).unwrap();
            let ok = match solve_or_refute(&sys) {
                Outcome::Feasible(sol) => {
                    let rows_sum_to_c = sys.rows.iter().all(|row| {
                        let total: Rational = row
                            .coeffs
                            .iter()
                            .map(|(&k, coeff)| coeff * sol.assignment.get(&sys.variables[k]).unwrap())
                            .sum();
                        total == c
                    });
                    let zero_ok = !c.is_zero() || sol.assignment.iter().all(|(_, v)| v.is_zero());
                    rows_sum_to_c && zero_ok && sys.is_satisfied_by(&sol.assignment)
                }
                Outcome::Infeasible(_) => false,
            };
            if !ok {
                failures.push(format!("n={n} c={c}"));
            }
        }
    }
    report(
        "AC5",
        "constant rules are feasible on the same sets",
        failures.is_empty(),
        &format!("failures: {failures:?}"),
    );
    assert!(failures.is_empty());
}

fn ac6_brute_force_grid() {
    let start = Instant::now();
    let mut grid = Vec::new();
    for a in 1..=4 {
        for b in 1..=4 {
            for c in 1..=4 {
                grid.push(BidVector::from_pairs([(1, q(a)), (2, q(b)), (3, q(c))]));
            }
        }
    }
    let sys = build_balance_system(&grid, &PriceRule::NegSecondPrice).unwrap();
    let verified = match solve_or_refute(&sys) {
        Outcome::Infeasible(cert) => verify_certificate(&sys, &cert).unwrap(),
        Outcome::Feasible(_) => false,
    };
    let elapsed = start.elapsed();
    let ok = verified && sys.rows.len() == 64 && elapsed < Duration::from_secs(5);
    report(
        "AC6",
        "3 bidders on grid {1..4}: balance infeasible",
        ok,
        &format!("{} rows, {} unknowns, certificate verified: {verified}, {elapsed:?}", sys.rows.len(), sys.variables.len()),
    );
    assert!(ok);
}

fn ac7_adequacy_mutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut deletions = 0;
    for case in 0..100 {
        let len = rng.gen_range(0..=5);
        let base = BidVector::from_pairs((0..len).map(|k| (k as u64 + 3, q(rng.gen_range(1..=6)))));
        let b0 = if rng.gen_bool(0.75) {
            base.max_bid().cloned().unwrap_or(q(1)) + q(rng.gen_range(0..=2))
        } else {
            q(rng.gen_range(1..=6))
        };
        let qt = Quintuple::new(base.clone(), b0.clone(), PriceRule::NegSecondPrice, 1, 2);
        let set = build_adequate_set(&qt).unwrap();

        // adequate exactly when flat invariance holds
        if is_adequate(&set.members, &qt) != set.is_flat_invariant() {
            failures.push(format!("case {case}: adequacy disagrees with flat invariance"));
        }
        if !set.is_flat_invariant() {
            continue;
        }

        for m in &set.members {
            let mut smaller = set.members.clone();
            smaller.remove(m);
            deletions += 1;
            if check_adequacy(&smaller, &qt).structure.is_ok() {
                failures.push(format!("case {case}: deleting {m} kept the structure"));
            }
        }

        let mut injected = set.members.iter().next().unwrap().clone();
        let above = &b0 + &q(1);
        injected.insert(BidderId(1), above.clone());
        injected.insert(BidderId(2), above);
        let mut mutated = set.members.clone();
        mutated.insert(injected);
        if check_adequacy(&mutated, &qt).flat.is_ok() || is_adequate(&mutated, &qt) {
            failures.push(format!("case {case}: injected violation not detected"));
        }
    }
    report(
        "AC7",
        "adequacy mutation suite",
        failures.is_empty(),
        &format!("100 cases, {deletions} deletions; failures: {failures:?}"),
    );
    assert!(failures.is_empty());
}

fn nonzero(rng: &mut impl Rng) -> Rational {
    loop {
        let d = random_rational(rng);
        if !d.is_zero() {
            return d;
        }
    }
}

fn random_triple(rng: &mut impl Rng) -> Option<(CounterexampleTriple, PriceRule)> {
    let len = rng.gen_range(2..=6);
    let low = random_vector(rng, len);
    let mut high = low.clone();
    let moved = BidderId(rng.gen_range(1..=len as u64));
    high.insert(moved, low.get(moved).unwrap() + &q(rng.gen_range(1..=5)));

    let f_low = random_rational(rng);
    let g_low = random_rational(rng);
    let (f_high, g_high) = if rng.gen_bool(0.5) {
        (&f_low + &nonzero(rng), g_low.clone())
    } else {
        (f_low.clone(), &g_low + &nonzero(rng))
    };
    let f = PriceRule::external("f", [(low.clone(), f_low), (high.clone(), f_high)].into()).unwrap();
    let g = PriceRule::external("g", [(low.clone(), g_low), (high.clone(), g_high)].into()).unwrap();
    let tags = low
        .iter()
        .map(|(i, _)| (i, if rng.gen_bool(0.5) { Tag::F } else { Tag::G }))
        .collect();
    let t = CounterexampleTriple { low, high, tags, g };
    is_counterexample(&t, &f).then_some((t, f))
}

fn ac8_counterexample_and_inequality() {
    let t = vickrey_triple(1).unwrap();
    let f = PriceRule::NegSecondPrice;
    let hand = is_counterexample(&t, &f) && lemma3_check(&t, &f).unwrap() == (r(4, 3), r(2, 3), true);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut generated = 0;
    let mut rejected = 0;
    let mut failures = 0;
    while generated < 500 {
        match random_triple(&mut rng) {
            Some((t, f)) => {
                generated += 1;
                let (_, _, differ) = lemma3_check(&t, &f).unwrap();
                if !differ {
                    failures += 1;
                }
            }
            None => rejected += 1,
        }
    }
    let ok = hand && failures == 0;
    report(
        "AC8",
        "counterexample + inequality suite",
        ok,
        &format!("n=1 hand values: {hand}; {generated} triples ({rejected} candidates rejected), {failures} failures"),
    );
    assert!(ok);
}

fn witness_set_is_where_theorem_imposes_balance() {
    for n in 1..=4 {
        let report_n = vickrey_theorem(n).unwrap();
        let x = vickrey_witness_set(n).unwrap();
        assert!(x.is_subset(&report_n.witness_set));
        assert_eq!(x, report_n.witness_set);
        let dom = bidders(1..=n + 2);
        assert!(x.iter().all(|b| b.domain() == dom));
    }
    // the flat vector at the top bid always belongs to the set
    let x: BTreeSet<_> = vickrey_witness_set(2).unwrap();
    assert!(x.contains(&flat(&bidders(1..=4), &q(5))));
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("AC1", ac1_vickrey_theorem_instances),
        ("AC2", ac2_closed_form_payment),
        ("AC3", ac3_iteration_matches_closed_form),
        ("AC4", ac4_feasibility_refutation),
        ("AC5", ac5_positive_control),
        ("AC6", ac6_brute_force_grid),
        ("AC7", ac7_adequacy_mutations),
        ("AC8", ac8_counterexample_and_inequality),
        ("witness-set consistency", witness_set_is_where_theorem_imposes_balance),
    ];
    let failed: Vec<&str> = criteria
        .iter()
        .filter(|(_, run)| std::panic::catch_unwind(run).is_err())
        .map(|(id, _)| *id)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} checks passed", criteria.len());
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
