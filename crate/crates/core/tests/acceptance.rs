//! Acceptance suite: one pass/fail line per criterion.

use std::time::{Duration, Instant};

use constrained_recovery::algebra::{
    block_structure, commutant, conditional_expectation, random_algebra, same_span, AlgebraBasis, SPAN_TOL,
};
use constrained_recovery::channel::{
    choi_distance, commutant_blocks, compose, is_physical, local_complement_translators, local_complementary,
    local_complementary_definitional, Channel,
};
use constrained_recovery::fermion::{
    definite_parity_split, geometric_noise, global_parity, parity_dephasing, poisoning_noise,
    random_physical_channel, ring_window, split_reconstruction_residual, standard_ring, FermionSystem, Monomial,
};
use constrained_recovery::matrix::{c, cr, eye, hs_inner, ket, max_abs, tensor, unit, CMatrix, CVector};
use constrained_recovery::random::{ginibre, random_density, random_kraus, random_unitary, seeded};
use constrained_recovery::recovery::{
    kl_check, optimal_recovery_fidelity, superselection_kl_check, verify_duality, Code, DualityVerdict,
    RecoveryConstraint, Verdict, DEFAULT_TOL,
};
use constrained_recovery::SolveOptions;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, elapsed: Duration, limit: Option<Duration>, o: &Outcome) -> bool {
    let in_time = limit.map_or(true, |l| elapsed <= l);
    let ok = o.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" (limit {:.0}s)", l.as_secs_f64()));
    println!(
        "criterion {id} [{}] {name}: {} in {:.2}s{budget}",
        if ok { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64()
    );
    ok
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn half() -> num_complex::Complex64 {
    cr(std::f64::consts::FRAC_1_SQRT_2)
}

fn pauli_z() -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_vec(vec![cr(1.0), cr(-1.0)]))
}

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

fn random_channel<R: Rng>(rng: &mut R, din: usize, dout: usize, rank: usize) -> Channel {
    // a Stinespring isometry needs dout·rank ≥ din
    let rank = rank.max(din.div_ceil(dout));
    Channel::from_kraus(random_kraus(rng, din, dout, rank)).unwrap()
}

fn crit1() -> Outcome {
    let mut rng = seeded(0xC1);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let count = 25;
    for _ in 0..count {
        let din = rng.gen_range(2..=4);
        let dn = rng.gen_range(2..=4);
        let dm = rng.gen_range(2..=4);
        let (kn, km) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let n = random_channel(&mut rng, din, dn, kn);
        let m = random_channel(&mut rng, din, dm, km);
        let rho = random_density(&mut rng, din);
        let d = verify_duality(&n, &m, &rho, &RecoveryConstraint::Unconstrained, &opts(), 1e-5).unwrap();
        worst = worst.max(d.difference);
        bad += usize::from(d.verdict != DualityVerdict::Pass);
    }
    Outcome { pass: bad == 0, detail: format!("{count} pairs, max |LHS-RHS| = {worst:.2e}, failures {bad}") }
}

fn crit2() -> Outcome {
    let sys = FermionSystem::new(2).unwrap();
    let cg = global_parity(&sys);
    let p = parity_dephasing(&cg);
    let mut rng = seeded(0xC2);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let count = 12;
    for k in 0..count {
        // alternate physical and unrestricted noise; targets id or a physical channel
        let n = if k % 2 == 0 {
            random_physical_channel(&mut rng, &cg, 1, 1).unwrap()
        } else {
            random_channel(&mut rng, 4, 4, 2)
        };
        let m = if k % 3 == 0 { random_physical_channel(&mut rng, &cg, 1, 0).unwrap() } else { Channel::identity(4) };
        let rho = if k % 4 == 0 { eye(4) * cr(0.25) } else { random_density(&mut rng, 4) };
        let con = RecoveryConstraint::Physical { p: p.clone(), q: p.clone() };
        let d = verify_duality(&n, &m, &rho, &con, &opts(), 1e-5).unwrap();
        worst = worst.max(d.difference);
        bad += usize::from(d.verdict != DualityVerdict::Pass);
    }
    Outcome { pass: bad == 0, detail: format!("{count} N=2 instances, max |LHS-RHS| = {worst:.2e}, failures {bad}") }
}

fn crit3() -> Outcome {
    let sys = FermionSystem::new(2).unwrap();
    let cg = global_parity(&sys);
    let parity_alg = AlgebraBasis::span_of(4, &[eye(4), cg.clone()]).unwrap();
    let mut rng = seeded(0xC3);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    let count = 10;
    for _ in 0..count {
        let din = rng.gen_range(2..=3);
        let n = random_channel(&mut rng, din, 4, 2);
        let m = random_channel(&mut rng, din, 4, 2);
        let rho = random_density(&mut rng, din);
        let con = RecoveryConstraint::Fixes { algebra: parity_alg.clone() };
        let d = verify_duality(&n, &m, &rho, &con, &opts(), 1e-5).unwrap();
        worst = worst.max(d.difference);
        bad += usize::from(d.verdict != DualityVerdict::Pass);
    }
    // the full even algebra of two modes as a second parity algebra
    let even: Vec<CMatrix> = [vec![], vec![1, 2], vec![3, 4], vec![1, 2, 3, 4], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4]]
        .iter()
        .map(|s| sys.monomial(s).unwrap())
        .collect();
    let even_alg = AlgebraBasis::span_of(4, &even).unwrap();
    let extra = 3;
    for _ in 0..extra {
        let n = random_channel(&mut rng, 2, 4, 2);
        let m = random_channel(&mut rng, 2, 4, 2);
        let rho = random_density(&mut rng, 2);
        let con = RecoveryConstraint::Fixes { algebra: even_alg.clone() };
        let d = verify_duality(&n, &m, &rho, &con, &opts(), 1e-5).unwrap();
        worst = worst.max(d.difference);
        bad += usize::from(d.verdict != DualityVerdict::Pass);
    }
    Outcome {
        pass: bad == 0,
        detail: format!(
            "{count} instances with B = span{{1,C}} and {extra} with the even algebra on dim 4, max |LHS-RHS| = {worst:.2e}, failures {bad}"
        ),
    }
}

struct KlCase {
    name: String,
    code: Code,
    kraus: Vec<CMatrix>,
}

fn kl_corpus() -> Vec<KlCase> {
    let mut cases = Vec::new();
    let x = pauli_x();
    let z = pauli_z();
    let id2 = eye(2);
    let three = |a: &CMatrix, b: &CMatrix, cc: &CMatrix| tensor(&tensor(a, b), cc);
    let rep = Code::from_columns(&[ket(8, 0), ket(8, 7)]).unwrap();
    let flips = [three(&x, &id2, &id2), three(&id2, &x, &id2), three(&id2, &id2, &x)];
    let p0 = 0.7f64.sqrt();
    let q = (0.1f64).sqrt();
    let mut single = vec![eye(8) * cr(p0)];
    single.extend(flips.iter().map(|f| f * cr(q)));
    cases.push(KlCase { name: "repetition code, single flips".into(), code: rep.clone(), kraus: single });
    let mut double = vec![eye(8) * cr(p0)];
    double.push(three(&x, &x, &id2) * cr(0.3f64.sqrt()));
    cases.push(KlCase { name: "repetition code, double flip".into(), code: rep.clone(), kraus: double });
    cases.push(KlCase {
        name: "repetition code, phase flip".into(),
        code: rep.clone(),
        kraus: vec![eye(8) * half(), three(&z, &id2, &id2) * half()],
    });
    let zz = tensor(&z, &z);
    let even = Code::from_columns(&[ket(4, 0), ket(4, 3)]).unwrap();
    cases.push(KlCase { name: "ZZ phase on {00,11}".into(), code: even.clone(), kraus: vec![eye(4) * half(), zz * half()] });
    cases.push(KlCase {
        name: "X on second qubit of {00,01}".into(),
        code: Code::from_columns(&[ket(4, 0), ket(4, 1)]).unwrap(),
        kraus: vec![eye(4) * half(), tensor(&id2, &x) * half()],
    });
    cases.push(KlCase {
        name: "X on first qubit of {00,01}".into(),
        code: Code::from_columns(&[ket(4, 0), ket(4, 1)]).unwrap(),
        kraus: vec![eye(4) * half(), tensor(&x, &id2) * half()],
    });
    cases.push(KlCase { name: "identity noise".into(), code: Code::identity(3), kraus: vec![eye(3)] });
    let mut rng = seeded(0xC4);
    for k in 0..4 {
        let d = 3 + k;
        cases.push(KlCase {
            name: format!("random unitary noise, d={d}"),
            code: Code::new(random_unitary(&mut rng, d).columns(0, 2).into_owned()).unwrap(),
            kraus: vec![random_unitary(&mut rng, d)],
        });
    }
    for k in 0..5 {
        let d = 2 + k;
        let code = Code::new(random_unitary(&mut rng, d).columns(0, 2).into_owned()).unwrap();
        cases.push(KlCase {
            name: format!("random 2-Kraus noise, d={d}"),
            code,
            kraus: random_kraus(&mut rng, d, d, 2),
        });
    }
    // errors mapping the code to mutually orthogonal copies: correctable
    for k in 0..3 {
        let u = random_unitary(&mut rng, 6);
        let code = Code::new(u.columns(0, 2).into_owned()).unwrap();
        let mut kraus = Vec::new();
        for copy in 0..3 {
            let mut e = CMatrix::zeros(6, 6);
            for j in 0..2 {
                let target = u.column(2 * copy + j).into_owned();
                let src = u.column(j).into_owned();
                e += &target * src.adjoint();
            }
            // complete to a unitary on the rest of the space
            kraus.push(e);
        }
        let weights = [0.5, 0.3, 0.2];
        let mut s = CMatrix::zeros(6, 6);
        let mut scaled = Vec::new();
        for (e, w) in kraus.iter().zip(weights) {
            let e2 = e * cr(f64::sqrt(w));
            s += e2.adjoint() * &e2;
            scaled.push(e2);
        }
        // fill the complement of the code with an isometric part so Σ E†E = 1
        let rest = eye(6) - &s;
        let fill = constrained_recovery::matrix::herm_sqrt(&rest).unwrap();
        scaled.push(fill);
        let name = format!("orthogonal error copies #{k}");
        cases.push(KlCase { name, code, kraus: scaled });
    }
    // dephasing a qubit of a random 2-dim code in dim 4: not correctable
    let code = Code::new(random_unitary(&mut rng, 4).columns(0, 2).into_owned()).unwrap();
    cases.push(KlCase {
        name: "dephasing first qubit, random code".into(),
        code,
        kraus: vec![tensor(&unit(2, 0, 0), &id2), tensor(&unit(2, 1, 1), &id2)],
    });
    // amplitude damping on the [[4,2]]-style code {0000+1111, 0011+1100}: not exact
    let g = 0.2f64;
    let ad = [
        CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr((1.0 - g).sqrt())]),
        CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(g.sqrt()), cr(0.0), cr(0.0)]),
    ];
    let b0 = (ket(8, 0) + ket(8, 7)) * half();
    let b1 = (ket(8, 3) + ket(8, 4)) * half();
    let code = Code::from_columns(&[b0, b1]).unwrap();
    let kraus: Vec<CMatrix> = ad.iter().map(|a| three(a, &id2, &id2)).collect();
    cases.push(KlCase { name: "amplitude damping on a 3-qubit code".into(), code, kraus });
    cases
}

fn crit4() -> Outcome {
    let cases = kl_corpus();
    let mut disagreements = Vec::new();
    let (mut yes, mut no) = (0, 0);
    for case in &cases {
        let n = Channel::from_kraus(case.kraus.clone());
        let n = match n {
            Ok(n) => n,
            Err(e) => {
                disagreements.push(format!("{}: invalid channel {e}", case.name));
                continue;
            }
        };
        let rep = kl_check(&case.code, &case.kraus, DEFAULT_TOL).unwrap();
        let nw = compose(&n, &case.code.encoding()).unwrap();
        let k = case.code.logical_dim();
        let rho = eye(k) / cr(k as f64);
        let f = optimal_recovery_fidelity(&nw, &Channel::identity(k), &rho, &RecoveryConstraint::Unconstrained, &opts())
            .unwrap();
        let kl_ok = rep.verdict == Verdict::Correctable;
        let sdp_ok = (f.value - 1.0).abs() <= 1e-5;
        if kl_ok {
            yes += 1;
        } else {
            no += 1;
        }
        if kl_ok != sdp_ok {
            disagreements.push(format!("{} (residual {:.2e}, fidelity {:.8})", case.name, rep.residual, f.value));
        }
    }
    Outcome {
        pass: disagreements.is_empty() && cases.len() >= 20 && yes > 0 && no > 0,
        detail: format!(
            "{} cases ({yes} correctable, {no} not), disagreements: {}",
            cases.len(),
            if disagreements.is_empty() { "none".into() } else { disagreements.join("; ") }
        ),
    }
}

fn ring_projectors(cg: &CMatrix) -> Vec<CMatrix> {
    let d = cg.nrows();
    vec![(eye(d) + cg) * cr(0.5), (eye(d) - cg) * cr(0.5)]
}

fn crit5() -> Outcome {
    let ring = standard_ring(6, &[1, 4, 7, 10]).unwrap();
    let sys = &ring.system;
    let nm = sys.n_majoranas();
    let ps = ring_projectors(&ring.global_parity());
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut count = 0;
    for start in 1..=nm {
        let win = ring_window(start, 2, nm);
        let bil = || Monomial::new(win.clone(), c(0.0, 1.0));
        // every even-monomial Kraus set inside the window: {1}, {i w w}, and weighted mixtures
        let sets: Vec<Vec<Vec<Monomial>>> = vec![
            vec![vec![Monomial::new(vec![], cr(1.0))]],
            vec![vec![bil()]],
            vec![vec![Monomial::new(vec![], half())], vec![Monomial::new(win.clone(), c(0.0, 1.0) * half())]],
            vec![
                vec![Monomial::new(vec![], cr(0.9f64.sqrt()))],
                vec![Monomial::new(win.clone(), c(0.0, 0.1f64.sqrt()))],
            ],
            vec![vec![Monomial::new(vec![], cr(0.6)), Monomial::new(win.clone(), cr(0.8))]],
        ];
        for polys in sets {
            let n = geometric_noise(sys, 2, &polys, false).unwrap();
            let r = superselection_kl_check(&ring.code, n.kraus(), &ps, 1e-10).unwrap();
            count += 1;
            worst = worst.max(r.residual);
            if r.verdict != Verdict::Correctable || r.residual > 1e-10 {
                failures.push(format!("window {win:?}"));
            }
        }
    }
    // Kraus operators each of support 2 but spread over two windows bridge two unpaired modes
    let mixed = vec![
        vec![Monomial::new(vec![4, 5], c(0.0, 1.0) * half())],
        vec![Monomial::new(vec![6, 7], c(0.0, 1.0) * half())],
    ];
    let n = geometric_noise(sys, 2, &mixed, false).unwrap();
    let r = superselection_kl_check(&ring.code, n.kraus(), &ps, 1e-10).unwrap();
    println!(
        "  info: Kraus set {{i w4 w5, i w6 w7}}/sqrt2 (two windows) -> {} (residual {:.3e})",
        r.verdict.as_str(),
        r.residual
    );
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "N=6 ring, shortest interval {}, {count} window-supported Kraus sets, max residual {worst:.2e}, failures {}",
            ring.shortest_interval(),
            failures.len()
        ),
    }
}

fn crit6() -> Outcome {
    let ring = standard_ring(6, &[1, 4, 7, 10]).unwrap();
    let ps = ring_projectors(&ring.global_parity());
    let n = poisoning_noise(&ring.system, 1, 4).unwrap();
    let r = superselection_kl_check(&ring.code, n.kraus(), &ps, DEFAULT_TOL).unwrap();
    let check_ok = r.verdict == Verdict::NotCorrectable && r.residual >= 1e-3;

    let small = standard_ring(3, &[1, 2, 3, 4]).unwrap();
    let noise = poisoning_noise(&small.system, 1, 2).unwrap();
    let nw = compose(&noise, &small.code.encoding()).unwrap();
    let rho = eye(4) * cr(0.25);
    let d = verify_duality(&nw, &Channel::identity(4), &rho, &RecoveryConstraint::Unconstrained, &opts(), 1e-5)
        .unwrap();
    let sdp_ok = d.verdict == DualityVerdict::Pass && d.lhs.value <= 1.0 - 1e-3;
    Outcome {
        pass: check_ok && sdp_ok,
        detail: format!(
            "N=6 check {} (residual {:.3e}); N=3 optimum {:.6} vs dual side {:.6}",
            r.verdict.as_str(),
            r.residual,
            d.lhs.value,
            d.rhs.value
        ),
    }
}

fn crit7() -> Outcome {
    let mut rng = seeded(0xC7);
    let mut worst: f64 = 0.0;
    let mut phys_bad = 0;
    let mut nonphys_missed = 0;
    let count = 24;
    for k in 0..count {
        let n_modes = 1 + k % 3;
        let sys = FermionSystem::new(n_modes).unwrap();
        let cg = global_parity(&sys);
        let p = parity_dephasing(&cg);
        let d = sys.dim();
        let n = random_physical_channel(&mut rng, &cg, 1 + k % 2, 1 + (k / 2) % 2).unwrap();
        let split = definite_parity_split(&n, &cg).unwrap();
        let res = split_reconstruction_residual(&n, &split, &cg).unwrap();
        worst = worst.max(res);
        let (phys, _) = is_physical(&n, &p, &p, 1e-9).unwrap();
        phys_bad += usize::from(res > 1e-9 || !phys);
        let bad = Channel::from_kraus(random_kraus(&mut rng, d, d, 2)).unwrap();
        let (phys, _) = is_physical(&bad, &p, &p, 1e-9).unwrap();
        nonphys_missed += usize::from(phys);
    }
    Outcome {
        pass: phys_bad == 0 && nonphys_missed == 0,
        detail: format!(
            "{count} physical (max residual {worst:.2e}, failures {phys_bad}); {count} non-physical (misclassified {nonphys_missed})"
        ),
    }
}

fn crit8() -> Outcome {
    let mut rng = seeded(0xC8);
    let shapes: Vec<Vec<(usize, usize)>> = vec![
        vec![(2, 1)],
        vec![(1, 1), (1, 1)],
        vec![(2, 1), (1, 1)],
        vec![(1, 2), (1, 1)],
        vec![(2, 2)],
        vec![(1, 1), (1, 1), (1, 1)],
        vec![(2, 1), (1, 2)],
        vec![(3, 1), (1, 1)],
        vec![(2, 2), (1, 1)],
        vec![(1, 3), (2, 1)],
        vec![(2, 1), (2, 1), (1, 1)],
        vec![(3, 2)],
        vec![(2, 3), (1, 2)],
        vec![(4, 2)],
        vec![(2, 4), (2, 2), (1, 1)],
        vec![(3, 3), (1, 2), (1, 1), (1, 1)],
        vec![(4, 4)],
    ];
    let mut count = 0;
    let mut failures = Vec::new();
    let mut max_dim = 0;
    for k in 0..51 {
        let shape = &shapes[k % shapes.len()];
        let a = random_algebra(&mut rng, shape);
        let d = a.ambient_dim();
        max_dim = max_dim.max(d);
        count += 1;
        let cc = commutant(&commutant(&a));
        if !same_span(&cc, &a, SPAN_TOL) {
            failures.push(format!("{shape:?}: double commutant"));
        }
        let e = conditional_expectation(&a).unwrap();
        let v = e.validate(1e-9);
        if !v.valid {
            failures.push(format!("{shape:?}: not CPTP"));
        }
        if choi_distance(&compose(&e, &e).unwrap(), &e).unwrap() > 1e-9 {
            failures.push(format!("{shape:?}: not idempotent"));
        }
        let x = ginibre(&mut rng, d, d);
        let y = ginibre(&mut rng, d, d);
        let lhs = hs_inner(&x, &e.apply(&y));
        let rhs = hs_inner(&e.apply(&x), &y);
        if (lhs - rhs).norm() > 1e-9 * (x.norm() * y.norm()).max(1.0) {
            failures.push(format!("{shape:?}: not self-adjoint"));
        }
        if a.basis().iter().any(|b| max_abs(&(e.apply(b) - b)) > 1e-9) {
            failures.push(format!("{shape:?}: does not fix the algebra"));
        }
        let bs = block_structure(&a).unwrap();
        let rt = a.basis().iter().map(|b| (bs.assemble(&bs.split(b)) - b).norm()).fold(0.0, f64::max);
        if rt > 1e-8 {
            failures.push(format!("{shape:?}: round trip {rt:.2e}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{count} random algebras (dims <= {max_dim}), failures: {}", if failures.is_empty() { "none".into() } else { failures.join("; ") }),
    }
}

fn crit9() -> Outcome {
    let mut rng = seeded(0xC9);
    let shapes: Vec<Vec<(usize, usize)>> =
        vec![vec![(1, 1), (1, 1)], vec![(2, 1)], vec![(1, 2)], vec![(1, 1), (1, 1), (1, 1)], vec![(2, 1), (1, 1)], vec![(1, 2), (1, 1)], vec![(2, 2)], vec![(1, 1), (1, 1), (1, 1), (1, 1)]];
    let mut worst: f64 = 0.0;
    let count = 24;
    for k in 0..count {
        let b = random_algebra(&mut rng, &shapes[k % shapes.len()]);
        let d = b.ambient_dim();
        let din = rng.gen_range(2..=4);
        let kn = rng.gen_range(1..=3);
        let n = random_channel(&mut rng, din, d, kn);
        let cons = local_complementary(&n, &b).unwrap();
        let def = local_complementary_definitional(&n, &b).unwrap();
        let (t, tb) = local_complement_translators(&commutant_blocks(&b).unwrap(), n.kraus_rank()).unwrap();
        worst = worst.max(choi_distance(&compose(&t, &cons).unwrap(), &def).unwrap());
        worst = worst.max(choi_distance(&compose(&tb, &def).unwrap(), &cons).unwrap());
    }
    Outcome { pass: worst <= 1e-8, detail: format!("{count} (channel, algebra) pairs, max Choi distance {worst:.2e}") }
}

#[test]
fn acceptance() {
    type Crit = (usize, &'static str, fn() -> Outcome, Option<u64>);
    let crits: Vec<Crit> = vec![
        (1, "unconstrained duality", crit1, Some(60)),
        (2, "physical-recovery duality", crit2, None),
        (3, "fixed-algebra duality", crit3, None),
        (4, "KL verdict vs SDP fidelity", crit4, None),
        (5, "Majorana ring, correctable windows", crit5, Some(30)),
        (6, "Majorana ring, poisoning", crit6, None),
        (7, "definite-parity split and physicality", crit7, None),
        (8, "algebra engine", crit8, Some(300)),
        (9, "local complement consistency", crit9, None),
    ];
    let mut all = true;
    for (id, name, f, limit) in crits {
        let t = Instant::now();
        let o = f();
        all &= report(id, name, t.elapsed(), limit.map(Duration::from_secs), &o);
    }
    assert!(all, "some acceptance criteria failed");
}
