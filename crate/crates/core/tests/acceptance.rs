//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::gen;
use common::{best_return, knapsack_best, knapsack_closed_form, load, q, rand_rat, var};
use xadd_sdp::cli::{cmd_grid, to_decimal, RunArgs};
use xadd_sdp::domlang::parse_case;
use xadd_sdp::prune::{feasible, ConstraintSet};
use xadd_sdp::sdp::{self, regress, value_at, SolveOptions};
use xadd_sdp::{parse_domain, Assignment, Op, Polynomial, Rational, State, Substitution, Vocab, XaddStore};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 7] = [
        ("knapsack ground truth", knapsack_ground_truth, Some(Duration::from_secs(10))),
        ("deterministic oracle", deterministic_oracle, Some(Duration::from_secs(60))),
        ("pruning soundness and trend", pruning_trend, None),
        ("xadd algebra", xadd_algebra, None),
        ("feasibility oracle", feasibility_oracle, None),
        ("discrete marginalization", discrete_marginalization, None),
        ("grid diagonal boundary", grid_boundary, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = match panic::catch_unwind(AssertUnwindSafe(run)) {
            Ok(r) => r,
            Err(e) => Err(format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            )),
        };
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > *b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS in {elapsed:.2?} [{detail}]"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL in {elapsed:.2?}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn knapsack_ground_truth() -> Outcome {
    let mut d = load("knapsack");
    ensure!(d.mdp.discount.is_one(), "discount is {}", d.mdp.discount);
    let opts = SolveOptions { horizon: 3, ..Default::default() };
    let r = sdp::solve(&mut d.store, &d.mdp, &opts).map_err(|e| e.to_string())?;
    ensure!(r.converged_at == Some(3), "converged_at = {:?}", r.converged_at);
    ensure!(
        r.value(3).unwrap() == r.value(2).unwrap(),
        "V3 and V2 are different nodes"
    );
    let (k, x1, x2) = (var(&d, "k"), var(&d, "x1"), var(&d, "x2"));
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..10_000 {
        let s = d.mdp.random_state(&mut rng);
        let got = value_at(&d.store, &d.mdp, &r, 2, &s).map_err(|e| e.to_string())?;
        let (kv, a, b) = (s.real(k).unwrap(), s.real(x1).unwrap(), s.real(x2).unwrap());
        let brute = best_return(&d, &s, 2).max(best_return(&d, &s, 1)).max(Rational::zero());
        ensure!(got == brute, "V2{s:?} = {got}, enumeration gives {brute}");
        let direct = knapsack_best(kv, a, b, 2);
        ensure!(got == direct, "V2{s:?} = {got}, direct simulation gives {direct}");
        let closed = knapsack_closed_form(kv, a, b);
        ensure!(got == closed, "V2{s:?} = {got}, closed form gives {closed}");
    }
    Ok(format!("converged at 3, {} nodes, 10000 states", r.iterations[2].stats.nodes))
}

fn deterministic_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut detail = Vec::new();
    for (name, horizon) in [("rover_linear_k2", 4), ("rover_nonlinear_k1", 3)] {
        let mut d = load(name);
        let opts = SolveOptions { horizon, ..Default::default() };
        let r = sdp::solve(&mut d.store, &d.mdp, &opts).map_err(|e| e.to_string())?;
        let states: Vec<State> = (0..200).map(|_| d.mdp.random_state(&mut rng)).collect();
        for h in 1..=horizon {
            for s in &states {
                let got = value_at(&d.store, &d.mdp, &r, h, s).map_err(|e| e.to_string())?;
                let want = best_return(&d, s, h);
                ensure!(got == want, "{name}: V{h}{s:?} = {got}, enumeration gives {want}");
            }
        }
        detail.push(format!("{name} {} nodes", r.iterations.last().unwrap().stats.nodes));
        if name == "rover_nonlinear_k1" {
            let (x, y, hv) = (var(&d, "x"), var(&d, "y"), var(&d, "h"));
            let at = |a: Rational, b: Rational| State::new().with_real(x, a).with_real(y, b).with_bool(hv, false);
            let v1 = value_at(&d.store, &d.mdp, &r, 1, &at(q(1, 1), q(1, 1))).map_err(|e| e.to_string())?;
            ensure!(v1 == q(2, 1), "V1(1,1,not h) = {v1}");
            let v2 = value_at(&d.store, &d.mdp, &r, 2, &at(q(12, 5), q(0, 1))).map_err(|e| e.to_string())?;
            ensure!(v2 == q(36, 25), "V2(2.4,0,not h) = {v2}");
        }
    }
    Ok(detail.join(", "))
}

fn pruning_trend() -> Outcome {
    let horizon = 6;
    let mut plain = load("rover_linear_k3");
    let mut pruned = load("rover_linear_k3");
    let rp = sdp::solve(&mut plain.store, &plain.mdp, &SolveOptions { horizon, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let rq = sdp::solve(&mut pruned.store, &pruned.mdp, &SolveOptions { horizon, prune: true, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(3);
    let mut counts = Vec::new();
    for h in 1..=horizon {
        for _ in 0..1000 {
            let s = plain.mdp.random_state(&mut rng);
            let a = value_at(&plain.store, &plain.mdp, &rp, h, &s).map_err(|e| e.to_string())?;
            let b = value_at(&pruned.store, &pruned.mdp, &rq, h, &s).map_err(|e| e.to_string())?;
            ensure!(a == b, "V{h}{s:?}: unpruned {a}, pruned {b}");
        }
        let np = rp.iteration(h).unwrap().stats.nodes;
        let nq = rq.iteration(h).unwrap().stats.nodes;
        ensure!(nq <= np, "iteration {h}: pruned {nq} nodes > unpruned {np}");
        counts.push((nq, np));
    }
    let pruned_counts: Vec<i64> = counts.iter().map(|c| c.0 as i64).collect();
    let diffs: Vec<i64> = pruned_counts[2..].windows(2).map(|w| w[1] - w[0]).collect();
    for w in diffs.windows(2) {
        ensure!(
            w[1] <= w[0].max(2 * w[0]),
            "pruned counts {pruned_counts:?}: differences {diffs:?} grow too fast"
        );
    }
    Ok(format!("pruned/unpruned nodes {counts:?}"))
}

fn xadd_algebra() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let space = gen::space();
    let [a, b, c] = [space.reals[0], space.reals[1], space.reals[2]];
    let ops = [Op::Add, Op::Sub, Op::Mul, Op::Max, Op::Min];
    for pair in 0..500 {
        let mut store = XaddStore::new(space.vocab.clone());
        let (tf, tg) = (gen::tree(&mut rng, &space), gen::tree(&mut rng, &space));
        let f = store.reorder(&tf);
        let g = store.reorder(&tg);
        for r in [f, g] {
            store.check_invariants(r).map_err(|e| format!("pair {pair}: {e}"))?;
        }

        let results: Vec<_> = ops.iter().map(|op| store.apply(f, g, *op)).collect();
        ensure!(store.add(g, f) == results[0], "pair {pair}: add is not canonical under swap");
        ensure!(store.mul(g, f) == results[2], "pair {pair}: mul is not canonical under swap");
        ensure!(store.max(g, f) == results[3], "pair {pair}: max is not canonical under swap");

        ensure!(store.reorder(&store.to_tree(f)) == f, "pair {pair}: reorder(to_tree(f)) != f");
        ensure!(store.reorder(&tf) == f, "pair {pair}: reorder not idempotent");

        let s1 = Substitution::new().real(a, gen::poly(&mut rng, &[b, c], 1));
        let inner = gen::poly(&mut rng, &[c], 1);
        let s2 = Substitution::new().real(b, inner.clone());
        let composed_a = s1.reals[&a].subst(&[(b, inner.clone())].into_iter().collect()).unwrap();
        let s12 = Substitution::new().real(a, composed_a).real(b, inner);
        let f1 = store.subst(f, &s1).map_err(|e| e.to_string())?;
        let lhs = store.subst(f1, &s2).map_err(|e| e.to_string())?;
        let rhs = store.subst(f, &s12).map_err(|e| e.to_string())?;

        let restricted = [store.restrict(f, space.flag, true), store.restrict(f, space.flag, false)];
        for r in restricted {
            ensure!(!store.support(r).contains(&space.flag), "pair {pair}: restrict kept z");
        }

        let text = store.to_case(f);
        let back = store.from_case(&text).map_err(|e| format!("pair {pair}: {e}\n{text}"))?;
        ensure!(back == f, "pair {pair}: case round trip changed the diagram\n{text}");

        for _ in 0..100 {
            let pt = gen::point(&mut rng, &space);
            let fv = tf.eval(&pt).unwrap();
            let gv = tg.eval(&pt).unwrap();
            ensure!(store.eval(f, &pt).unwrap() == fv, "pair {pair}: reorder changed f at {pt:?}");
            for (op, r) in ops.iter().zip(&results) {
                let want = op.apply_values(&fv, &gv);
                let got = store.eval(*r, &pt).unwrap();
                ensure!(got == want, "pair {pair}: {op:?} at {pt:?} gives {got}, expected {want}");
            }

            let mut moved = pt.clone();
            let bv = s12.reals[&b].eval(&pt).unwrap();
            let av = s1.reals[&a].eval(&pt.clone().with_real(b, bv.clone())).unwrap();
            moved.set_real(a, av).set_real(b, bv);
            let want = tf.eval(&moved).unwrap();
            let l = store.eval(lhs, &pt).unwrap();
            let r = store.eval(rhs, &pt).unwrap();
            ensure!(l == want && r == want, "pair {pair}: subst law at {pt:?}: {l} / {r} vs {want}");

            for (value, r) in [true, false].into_iter().zip(restricted) {
                let want = tf.eval(&pt.clone().with_bool(space.flag, value)).unwrap();
                ensure!(store.eval(r, &pt).unwrap() == want, "pair {pair}: restrict at {pt:?}");
            }
        }
    }
    Ok("500 pairs x 100 points".into())
}

/// Rows `coeffs . x >= rhs`.
type Rows = Vec<(Vec<Rational>, Rational)>;

/// Solves a square system by Gaussian elimination; `None` when singular.
fn solve_square(rows: &[(Vec<Rational>, Rational)]) -> Option<Vec<Rational>> {
    let n = rows.len();
    let mut m: Vec<Vec<Rational>> = rows
        .iter()
        .map(|(a, b)| a.iter().cloned().chain(std::iter::once(b.clone())).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|r| !m[*r][col].is_zero())?;
        m.swap(col, pivot);
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let factor = &m[r][col] / &m[col][col];
                for k in col..=n {
                    let delta = &factor * &m[col][k];
                    m[r][k] -= delta;
                }
            }
        }
    }
    Some((0..n).map(|i| &m[i][n] / &m[i][i]).collect())
}

/// A bounded polyhedron is non-empty iff one of its vertices satisfies
/// every row.
fn vertex_feasible(n: usize, rows: &Rows) -> bool {
    fn choose(start: usize, k: usize, total: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for i in start..total {
            acc.push(i);
            choose(i + 1, k, total, acc, out);
            acc.pop();
        }
    }
    let mut subsets = Vec::new();
    choose(0, n, rows.len(), &mut Vec::new(), &mut subsets);
    subsets.iter().any(|idx| {
        let square: Vec<_> = idx.iter().map(|i| rows[*i].clone()).collect();
        match solve_square(&square) {
            Some(x) => rows.iter().all(|(a, b)| {
                let lhs: Rational = a.iter().zip(&x).map(|(p, v)| p * v).sum();
                lhs >= *b
            }),
            None => false,
        }
    })
}

fn feasibility_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut vocab = Vocab::new();
    let vars: Vec<_> = (0..4).map(|i| vocab.declare_free(&format!("v{i}")).unwrap()).collect();
    let (mut yes, mut no) = (0, 0);
    for system in 0..200 {
        let n = rng.gen_range(1..=4);
        let mut cs = ConstraintSet::new();
        let mut rows: Rows = Vec::new();
        for (i, v) in vars[..n].iter().enumerate() {
            let lo = { let den = rng.gen_range(1..=3); rand_rat(&mut rng, -10, 5, den) };
            let hi = &lo + { let den = rng.gen_range(1..=3); rand_rat(&mut rng, 0, 10, den) };
            cs = cs.with_bound(*v, lo.clone(), hi.clone());
            let mut unit = vec![Rational::zero(); n];
            unit[i] = Rational::one();
            rows.push((unit.clone(), lo));
            rows.push((unit.iter().map(|u| -u).collect(), -hi));
        }
        for _ in 0..rng.gen_range(0..=8) {
            let coeffs: Vec<Rational> = (0..n).map(|_| { let den = rng.gen_range(1..=3); rand_rat(&mut rng, -4, 4, den) }).collect();
            let constant = { let den = rng.gen_range(1..=4); rand_rat(&mut rng, -20, 20, den) };
            let mut p = Polynomial::constant(constant.clone());
            for (v, a) in vars.iter().zip(&coeffs) {
                p = p + Polynomial::var(*v).scale(a);
            }
            // p >= 0 asserted, or p > 0 denied (p <= 0).
            if rng.gen() {
                cs.push(p, false, true);
                rows.push((coeffs, -constant));
            } else {
                cs.push(p, true, false);
                rows.push((coeffs.iter().map(|a| -a).collect(), constant));
            }
        }
        let got = feasible(&cs).map_err(|e| e.to_string())?;
        let want = vertex_feasible(n, &rows);
        ensure!(got == want, "system {system}: feasible() = {got}, vertex enumeration {want}: {cs:?}");
        if want {
            yes += 1;
        } else {
            no += 1;
        }
    }
    Ok(format!("{yes} feasible, {no} infeasible"))
}

const TOY: &str = "
domain toy
cvar x [0, 10]
bvar a
bvar b

action go {
  a' ~ ([x > 5] 0.8 ([b] 0.3 0.6))
  b' ~ ([a] (x / 10) 0.5)
  x' = ([a'] (x / 2) (x + 1))
  reward = ([a] (x) (1))
}

discount 0.9
horizon 1
";

fn discrete_marginalization() -> Outcome {
    let mut d = parse_domain(TOY).map_err(|e| e.to_string())?;
    let (x, a, b) = (var(&d, "x"), var(&d, "a"), var(&d, "b"));
    let tree = parse_case("([a] ([b] (x) (2)) ([b] (3) (x^2)))", d.store.vocab()).map_err(|e| e.to_string())?;
    let v = d.store.reorder(&tree);
    let action = d.mdp.actions[0].clone();
    let qa = regress(&mut d.store, &d.mdp, &action, v).map_err(|e| e.to_string())?;

    let value = |av: bool, bv: bool, xv: &Rational| -> Rational {
        match (av, bv) {
            (true, true) => xv.clone(),
            (true, false) => q(2, 1),
            (false, true) => q(3, 1),
            (false, false) => xv * xv,
        }
    };
    let mut rng = StdRng::seed_from_u64(6);
    let mut checked = 0;
    for i in 0..400 {
        let xv = if i < 21 { q(i, 2) } else { { let den = rng.gen_range(1..=12); rand_rat(&mut rng, 0, 10, den) } };
        for (av, bv) in [(false, false), (false, true), (true, false), (true, true)] {
            let pa = if xv > q(5, 1) { q(4, 5) } else if bv { q(3, 10) } else { q(3, 5) };
            let pb = if av { &xv / q(10, 1) } else { q(1, 2) };
            let reward = if av { xv.clone() } else { Rational::one() };
            let mut sum = Rational::zero();
            for an in [true, false] {
                let xn = if an { &xv / q(2, 1) } else { &xv + q(1, 1) };
                let wa = if an { pa.clone() } else { Rational::one() - &pa };
                for bn in [true, false] {
                    let wb = if bn { pb.clone() } else { Rational::one() - &pb };
                    sum += &wa * &wb * value(an, bn, &xn);
                }
            }
            let want = reward + q(9, 10) * sum;
            let s = State::new().with_real(x, xv.clone()).with_bool(a, av).with_bool(b, bv);
            let got = d.store.eval(qa, &s).map_err(|e| e.to_string())?;
            ensure!(got == want, "Q at x={xv}, a={av}, b={bv}: {got}, expected {want}");
            checked += 1;
        }
    }
    Ok(format!("{checked} states"))
}

fn grid_boundary() -> Outcome {
    let res = 50;
    let args = RunArgs {
        domain: Some(common::domains_dir().join("knapsack.dcmdp")),
        horizon: Some(2),
        vars: vec!["x1".into(), "x2".into()],
        fix: vec!["k=0".into()],
        res,
        ..Default::default()
    };
    let csv = cmd_grid(&args).map_err(|e| format!("{e:#}"))?;
    let mut lines = csv.lines();
    ensure!(lines.next() == Some("x1,x2,value"), "unexpected header");
    let rows: Vec<&str> = lines.collect();
    ensure!(rows.len() == res * res, "{} rows", rows.len());
    let cap = q(100, 1);
    let mut inside = 0;
    let mut mixed_columns = 0;
    for i in 0..res {
        let (mut seen_in, mut seen_out) = (false, false);
        for j in 0..res {
            let cols: Vec<&str> = rows[i * res + j].split(',').collect();
            let x1 = q(100 * i as i64, res as i64 - 1);
            let x2 = q(100 * j as i64, res as i64 - 1);
            ensure!(
                cols[0] == to_decimal(&x1) && cols[1] == to_decimal(&x2),
                "row {} is not ({x1}, {x2})",
                i * res + j
            );
            let sum = &x1 + &x2;
            let want = if sum <= cap {
                inside += 1;
                seen_in = true;
                sum
            } else {
                seen_out = true;
                x1.clone().max(x2.clone())
            };
            ensure!(cols[2] == to_decimal(&want), "({x1}, {x2}): value {} expected {want}", cols[2]);
        }
        if seen_in && seen_out {
            mixed_columns += 1;
        }
    }
    ensure!(mixed_columns > 1, "boundary does not cut across columns");
    Ok(format!("{inside} of {} points on or below x1 + x2 = 100", res * res))
}
