use super::*;
use crate::algebra::{generate_algebra, random_algebra};
use crate::channel::{choi_distance, entanglement_fidelity, fixes_algebra, is_physical, kraus_overlap, tensor_channels};
use crate::fermion::{global_parity, parity_dephasing, poisoning_noise, standard_ring, Monomial, geometric_noise};
use crate::matrix::{c, ket, tensor};
use crate::random::{random_density, random_kraus, seeded};

fn pauli(p: char) -> CMatrix {
    match p {
        'X' => CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]),
        'Y' => CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)]),
        'Z' => CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]),
        _ => eye(2),
    }
}

fn h() -> Complex64 {
    cr(std::f64::consts::FRAC_1_SQRT_2)
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn dephasing() -> Channel {
    Channel::from_kraus(vec![unit(2, 0, 0), unit(2, 1, 1)]).unwrap()
}

#[test]
fn code_rejects_non_isometry() {
    assert!(Code::new(CMatrix::from_element(2, 1, cr(1.0))).is_err());
    assert!(Code::new(eye(3).columns(0, 2).into_owned()).is_ok());
}

#[test]
fn kl_trivial() {
    let code = Code::identity(2);
    let r = kl_check(&code, &[eye(2)], DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Correctable);
    assert!((r.coefficient("sigma").unwrap()[(0, 0)] - cr(1.0)).norm() < 1e-12);
}

#[test]
fn kl_zz_phase_is_correctable() {
    let code = Code::from_columns(&[ket(4, 0), ket(4, 3)]).unwrap();
    let zz = tensor(&pauli('Z'), &pauli('Z'));
    let r = kl_check(&code, &[eye(4) * h(), zz * h()], DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Correctable);
    assert!(r.residual < 1e-12);
}

#[test]
fn kl_bit_flip_on_second_qubit_leaks() {
    let code = Code::from_columns(&[ket(4, 0), ket(4, 1)]).unwrap();
    let x2 = tensor(&eye(2), &pauli('X'));
    let r = kl_check(&code, &[eye(4) * h(), x2 * h()], DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::NotCorrectable);
    // W†XW = σ_x on the logical qubit: misfit 2·|1/2|·√2 over the two off-diagonal blocks
    assert!((r.residual - 1.0).abs() < 1e-12, "{}", r.residual);
}

#[test]
fn global_parity_flip_is_correctable() {
    let ring = standard_ring(3, &[1, 2, 3, 4]).unwrap();
    let cg = ring.global_parity();
    let ps = vec![(eye(8) + &cg) * cr(0.5), (eye(8) - &cg) * cr(0.5)];
    let r = superselection_kl_check(&ring.code, &[cg.clone()], &ps, DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Correctable);
    assert_eq!(r.flag("charge_commutes_with_code"), Some(true));
}

#[test]
fn ring_window_noise_is_correctable() {
    let ring = standard_ring(6, &[1, 4, 7, 10]).unwrap();
    let sys = &ring.system;
    let cg = ring.global_parity();
    let ps = vec![(eye(sys.dim()) + &cg) * cr(0.5), (eye(sys.dim()) - &cg) * cr(0.5)];
    for j in [1usize, 4, 12] {
        let k = j % 12 + 1;
        let polys = vec![
            vec![Monomial::new(vec![], h())],
            vec![Monomial::new(vec![j, k], c(0.0, 1.0) * h())],
        ];
        let n = geometric_noise(sys, 2, &polys, false).unwrap();
        let r = superselection_kl_check(&ring.code, n.kraus(), &ps, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Correctable, "window ({j},{k})");
        assert!(r.residual <= 1e-10);
    }
}

#[test]
fn poisoning_is_not_correctable() {
    let ring = standard_ring(6, &[1, 4, 7, 10]).unwrap();
    let sys = &ring.system;
    let cg = ring.global_parity();
    let ps = vec![(eye(sys.dim()) + &cg) * cr(0.5), (eye(sys.dim()) - &cg) * cr(0.5)];
    let n = poisoning_noise(sys, 1, 4).unwrap();
    let r = superselection_kl_check(&ring.code, n.kraus(), &ps, DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::NotCorrectable);
    assert!(r.residual >= 1e-3);
}

#[test]
fn superselection_rejects_bad_projectors() {
    let code = Code::identity(2);
    assert!(superselection_kl_check(&code, &[eye(2)], &[unit(2, 0, 0)], DEFAULT_TOL).is_err());
    assert!(superselection_kl_check(&code, &[eye(2)], &[eye(2), unit(2, 0, 0)], DEFAULT_TOL).is_err());
}

#[test]
fn superselection_matches_kl_for_trivial_charge() {
    let mut rng = seeded(3);
    for seed in 0..4 {
        let code = Code::from_columns(&[ket(4, 0), ket(4, 3)]).unwrap();
        let kraus = if seed % 2 == 0 {
            vec![eye(4) * h(), tensor(&pauli('Z'), &pauli('Z')) * h()]
        } else {
            random_kraus(&mut rng, 4, 4, 2)
        };
        let a = kl_check(&code, &kraus, DEFAULT_TOL).unwrap();
        let b = superselection_kl_check(&code, &kraus, &[eye(4)], DEFAULT_TOL).unwrap();
        assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn superselection_sdp_branch_for_noncommuting_code() {
    // code mixing both charge sectors: |+⟩ ⊗ C², charge = Z on the first qubit
    let plus = (ket(2, 0) + ket(2, 1)) * h();
    let code = Code::from_columns(&[plus.kronecker(&ket(2, 0)), plus.kronecker(&ket(2, 1))]).unwrap();
    let z1 = tensor(&pauli('Z'), &eye(2));
    let ps = vec![(eye(4) + &z1) * cr(0.5), (eye(4) - &z1) * cr(0.5)];
    let r = superselection_kl_check(&code, &[eye(4)], &ps, DEFAULT_TOL).unwrap();
    assert_eq!(r.flag("charge_commutes_with_code"), Some(false));
    assert_eq!(r.verdict, Verdict::Correctable);
    let x2 = tensor(&eye(2), &pauli('X'));
    let r = superselection_kl_check(&code, &[eye(4) * h(), x2 * h()], &ps, DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::NotCorrectable);
}

#[test]
fn tensor_local_identity() {
    let code = Code::identity(4);
    let r = tensor_local_check(&code, (2, 2), &[eye(2)], DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Correctable);
    assert!((r.coefficient("lambda").unwrap()[(0, 0)] - cr(1.0)).norm() < 1e-12);
    assert!(tensor_local_check(&code, (2, 3), &[eye(2)], DEFAULT_TOL).is_err());
}

#[test]
fn tensor_local_bell_code_matches_sdp() {
    let b0 = (ket(4, 0) + ket(4, 3)) * h();
    let b1 = (ket(4, 1) + ket(4, 2)) * h();
    let code = Code::from_columns(&[b0, b1]).unwrap();
    let deph = [unit(2, 0, 0), unit(2, 1, 1)];
    let r = tensor_local_check(&code, (2, 2), &deph, DEFAULT_TOL).unwrap();
    let na = tensor_channels(&dephasing(), &Channel::identity(2));
    let n = compose(&na, &code.encoding()).unwrap();
    // recovery acting on A only: ℛ† fixes 1 ⊗ L(H_B), target the encoding itself
    let b_alg = AlgebraBasis::span_of(4, &(0..2).flat_map(|i| (0..2).map(move |j| tensor(&eye(2), &unit(2, i, j)))).collect::<Vec<_>>()).unwrap();
    let con = RecoveryConstraint::Fixes { algebra: b_alg };
    let fid = optimal_recovery_fidelity(&n, &code.encoding(), &(eye(2) * cr(0.5)), &con, &opts()).unwrap();
    assert_eq!(r.verdict == Verdict::Correctable, (fid.value - 1.0).abs() <= 1e-5, "{} {}", r.residual, fid.value);
    // the same noise is correctable without the locality requirement
    let free = optimal_recovery_fidelity(&n, &code.encoding(), &(eye(2) * cr(0.5)), &RecoveryConstraint::Unconstrained, &opts()).unwrap();
    assert!((free.value - 1.0).abs() < 1e-5);
}

#[test]
fn tensor_local_erased_factor() {
    // 𝒩_A = Tr(·)1/2 on a code |0⟩_A ⊗ H_B
    let code = Code::from_columns(&[ket(4, 0), ket(4, 1)]).unwrap();
    let kraus: Vec<CMatrix> = (0..2).flat_map(|i| (0..2).map(move |j| unit(2, i, j) * h())).collect();
    let r = tensor_local_check(&code, (2, 2), &kraus, DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Correctable);
}

#[test]
fn fermion_local_whole_ring() {
    let ring = standard_ring(3, &[1, 2, 3, 4]).unwrap();
    let sys = &ring.system;
    let all: Vec<usize> = (1..=6).collect();
    let polys = vec![vec![Monomial::new(vec![], h())], vec![Monomial::new(vec![5, 6], c(0.0, 1.0) * h())]];
    let n = geometric_noise(sys, 2, &polys, false).unwrap();
    let r = fermion_local_check(sys, &ring.code, n.kraus(), &all, DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, Verdict::Correctable);
    // the whole-system commutant is span{1, C}: the condition collapses to KL
    let kl = kl_check(&ring.code, n.kraus(), DEFAULT_TOL).unwrap();
    assert_eq!(kl.verdict, Verdict::Correctable);
}

#[test]
fn fermion_local_fixed_parity_code() {
    // two modes, code = even sector of mode 1, noise i w1 w2 on mode 1
    let sys = FermionSystem::new(2).unwrap();
    let cw = crate::fermion::parity_operator(&sys, &[1, 2]).unwrap();
    let p = cw.p_plus.clone();
    let (vals, vecs) = eigh(&p);
    let cols: Vec<CVector> = (0..4).filter(|&k| vals[k] > 0.5).map(|k| vecs.column(k).into_owned()).collect();
    let code = Code::from_columns(&cols).unwrap();
    let e = sys.monomial(&[1, 2]).unwrap() * c(0.0, 1.0);
    let kraus = vec![eye(4) * h(), e * h()];
    let r = fermion_local_check(&sys, &code, &kraus, &[1, 2], DEFAULT_TOL).unwrap();
    assert_eq!(r.flag("fixed_parity_code"), Some(true));
    let kl = kl_check(&code, &kraus, DEFAULT_TOL).unwrap();
    assert_eq!(r.verdict, kl.verdict);
}

#[test]
fn fermion_local_rejects_odd_kraus() {
    let ring = standard_ring(3, &[1, 2, 3, 4]).unwrap();
    let sys = &ring.system;
    let w1 = sys.majorana(1).unwrap().clone();
    let err = fermion_local_check(sys, &ring.code, &[w1], &[1, 2], DEFAULT_TOL).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn identity_recovery_value_one() {
    let id = Channel::identity(2);
    let r = optimal_recovery_fidelity(&id, &id, &(eye(2) * cr(0.5)), &RecoveryConstraint::Unconstrained, &opts()).unwrap();
    assert!((r.value - 1.0).abs() < 1e-6);
    assert!(r.is_certified());
    let d = verify_duality(&id, &id, &(eye(2) * cr(0.5)), &RecoveryConstraint::Unconstrained, &opts(), 1e-5).unwrap();
    assert_eq!(d.verdict, DualityVerdict::Pass);
    assert!((d.rhs.value - 1.0).abs() < 1e-6);
}

#[test]
fn depolarizing_value_half() {
    let n = Channel::completely_depolarizing(2);
    let id = Channel::identity(2);
    let rho = eye(2) * cr(0.5);
    let d = verify_duality(&n, &id, &rho, &RecoveryConstraint::Unconstrained, &opts(), 1e-5).unwrap();
    assert!((d.lhs.value - 0.5).abs() < 1e-6);
    assert!((d.rhs.value - 0.5).abs() < 1e-6);
}

#[test]
fn random_qubit_duality() {
    let mut rng = seeded(11);
    for _ in 0..5 {
        let n = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 2)).unwrap();
        let rho = random_density(&mut rng, 2);
        let d = verify_duality(&n, &Channel::identity(2), &rho, &RecoveryConstraint::Unconstrained, &opts(), 1e-5).unwrap();
        assert_eq!(d.verdict, DualityVerdict::Pass, "{} vs {}", d.lhs.value, d.rhs.value);
        // the optimizer is a channel attaining the value
        let r = d.lhs.channel().unwrap();
        let achieved = entanglement_fidelity(&compose(&r, &n).unwrap(), &Channel::identity(2), &rho).unwrap();
        assert!((achieved - d.lhs.value).abs() < 1e-5);
    }
}

#[test]
fn environment_side_identity_target_is_a_state() {
    // ℳ = id: ℳ̂ = Tr, so 𝒮 is a state σ and the value is max_σ F(𝒩̂, σ·Tr)
    let mut rng = seeded(5);
    let n = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 2)).unwrap();
    let rho = eye(2) * cr(0.5);
    let rhs = environment_side_fidelity(&n, &Channel::identity(2), &rho, &RecoveryConstraint::Unconstrained, &opts()).unwrap();
    assert_eq!(rhs.in_dim, 1);
    let sigma = rhs.channel().unwrap().apply(&eye(1));
    let nc = n.reduced().complementary();
    let rep = Channel::replacement(&sigma, 2).unwrap();
    let f = entanglement_fidelity(&nc, &rep, &rho).unwrap();
    assert!((f - rhs.value).abs() < 1e-5);
}

#[test]
fn algebra_projector_target_uses_commutant_projector() {
    // ℳ = 𝒫_𝒜 for 𝒜 = diagonal qubit algebra; its complement is equivalent to 𝒫_𝒜'
    let a = generate_algebra(&[pauli('Z')], 2).unwrap();
    let pa = algebra_projector(&a).unwrap();
    let pc = algebra_projector(&commutant(&a)).unwrap();
    let (v, _, _) = equivalent_complements(&pa.reduced().complementary(), &pc, &opts()).unwrap();
    assert_eq!(v, Equivalence::Equivalent);
}

#[test]
fn complement_representative_does_not_matter() {
    let mut rng = seeded(21);
    let n = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 3)).unwrap();
    // a non-minimal Kraus representation gives a larger environment
    let mut padded: Vec<CMatrix> = n.kraus().iter().map(|k| k * h()).collect();
    padded.extend(n.kraus().iter().map(|k| k * h()));
    let big = Channel::from_kraus(padded).unwrap();
    let (v, _, _) = equivalent_complements(&n.complementary(), &big.complementary(), &opts()).unwrap();
    assert_eq!(v, Equivalence::Equivalent);
    let m = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 2)).unwrap();
    let (v, _, _) = equivalent_complements(&n.complementary(), &m.complementary(), &opts()).unwrap();
    assert_eq!(v, Equivalence::NotEquivalent);
}

#[test]
fn physical_constraint_duality_and_soundness() {
    let sys = FermionSystem::new(2).unwrap();
    let cg = global_parity(&sys);
    let p = parity_dephasing(&cg);
    let mut rng = seeded(8);
    let n = Channel::from_kraus(random_kraus(&mut rng, 4, 4, 2)).unwrap();
    let m = Channel::identity(4);
    let rho = eye(4) * cr(0.25);
    let con = RecoveryConstraint::Physical { p: p.clone(), q: p.clone() };
    let d = verify_duality(&n, &m, &rho, &con, &opts(), 1e-5).unwrap();
    assert_eq!(d.verdict, DualityVerdict::Pass, "{} vs {}", d.lhs.value, d.rhs.value);
    let r = d.lhs.channel().unwrap();
    let pr = compose(&p, &r).unwrap();
    let prq = compose(&pr, &p).unwrap();
    assert!(choi_distance(&prq, &pr).unwrap() < 1e-6);
    let free = optimal_recovery_fidelity(&n, &m, &rho, &RecoveryConstraint::Unconstrained, &opts()).unwrap();
    let pm = compose(&p, &m).unwrap();
    let free_pm = optimal_recovery_fidelity(&n, &pm, &rho, &RecoveryConstraint::Unconstrained, &opts()).unwrap();
    assert!(d.lhs.value <= free_pm.value + 1e-7);
    let _ = free;
}

#[test]
fn fixed_algebra_duality_and_soundness() {
    let mut rng = seeded(4);
    let b = random_algebra(&mut rng, &[(1, 1), (1, 1)]);
    for _ in 0..3 {
        let n = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 2)).unwrap();
        let m = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 2)).unwrap();
        let rho = random_density(&mut rng, 2);
        let con = RecoveryConstraint::Fixes { algebra: b.clone() };
        let d = verify_duality(&n, &m, &rho, &con, &opts(), 1e-5).unwrap();
        assert_eq!(d.verdict, DualityVerdict::Pass, "{} vs {}", d.lhs.value, d.rhs.value);
        let r = d.lhs.channel().unwrap();
        let rep = fixes_algebra(&r, &b, 1e-6).unwrap();
        assert!(rep.fixes, "{:?}", rep);
        let free = optimal_recovery_fidelity(&n, &m, &rho, &RecoveryConstraint::Unconstrained, &opts()).unwrap();
        assert!(d.lhs.value <= free.value + 1e-7);
    }
}

#[test]
fn small_poisoning_instance() {
    let ring = standard_ring(3, &[1, 2, 3, 4]).unwrap();
    let noise = poisoning_noise(&ring.system, 1, 2).unwrap();
    assert!(is_physical(&noise, &parity_dephasing(&ring.global_parity()), &parity_dephasing(&ring.global_parity()), 1e-9).unwrap().0);
    let n = compose(&noise, &ring.code.encoding()).unwrap();
    let rho = eye(4) * cr(0.25);
    let d = verify_duality(&n, &Channel::identity(4), &rho, &RecoveryConstraint::Unconstrained, &opts(), 1e-5).unwrap();
    assert_eq!(d.verdict, DualityVerdict::Pass, "{} vs {}", d.lhs.value, d.rhs.value);
    assert!(d.lhs.value <= 1.0 - 1e-3);
}

#[test]
fn seesaw_correctable_is_one() {
    let code = Code::from_columns(&[ket(4, 0), ket(4, 3)]).unwrap();
    let zz = tensor(&pauli('Z'), &pauli('Z'));
    let n = Channel::from_kraus(vec![eye(4) * h(), zz * h()]).unwrap();
    let m = Channel::identity(4);
    let w = worst_case_fidelity_seesaw(&n, &m, &code, 5, &opts()).unwrap();
    assert!((w.value - 1.0).abs() < 1e-6, "{}", w.value);
    assert!(w.heuristic);
}

#[test]
fn seesaw_dephasing_is_inverse_sqrt_two() {
    let code = Code::identity(2);
    let w = worst_case_fidelity_seesaw(&dephasing(), &Channel::identity(2), &code, 5, &opts()).unwrap();
    let target = std::f64::consts::FRAC_1_SQRT_2;
    assert!((w.value - target).abs() < 1e-6, "{}", w.value);
    // grid oracle: the returned recovery's fidelity over Bloch-sphere states never drops below the bound
    let r = Channel::from_choi(&w.recovery, 2, 2).unwrap();
    let rn = compose(&r, &dephasing()).unwrap();
    let mut grid_min = f64::INFINITY;
    for i in 0..=10 {
        for j in 0..12 {
            let (th, ph) = (std::f64::consts::PI * i as f64 / 10.0, std::f64::consts::TAU * j as f64 / 12.0);
            for len in [0.0, 0.5, 1.0] {
                let (x, y, z) = (len * th.sin() * ph.cos(), len * th.sin() * ph.sin(), len * th.cos());
                let rho = (eye(2) + pauli('X') * cr(x) + pauli('Y') * cr(y) + pauli('Z') * cr(z)) * cr(0.5);
                grid_min = grid_min.min(entanglement_fidelity(&rn, &Channel::identity(2), &rho).unwrap());
            }
        }
    }
    assert!(grid_min >= w.value - 1e-7);
    assert!((grid_min - target).abs() < 1e-6);
}

#[test]
fn seesaw_bounded_by_maximally_mixed_value() {
    let mut rng = seeded(17);
    let code = Code::identity(2);
    let n = Channel::from_kraus(random_kraus(&mut rng, 2, 2, 2)).unwrap();
    let m = Channel::identity(2);
    let w = worst_case_fidelity_seesaw(&n, &m, &code, 6, &opts()).unwrap();
    let at_mixed = optimal_recovery_fidelity(&n, &m, &(eye(2) * cr(0.5)), &RecoveryConstraint::Unconstrained, &opts()).unwrap();
    assert!(w.value <= at_mixed.value + 1e-8);
    assert!(w.value <= w.upper_estimate + 1e-9);
}

#[test]
fn min_entanglement_fidelity_lower_bound_is_valid() {
    let mut rng = seeded(2);
    let e = random_kraus(&mut rng, 3, 3, 2);
    let f = random_kraus(&mut rng, 3, 3, 2);
    let (lower, val, sigma) = min_entanglement_fidelity(&e, &f, &(eye(3) / cr(3.0)), 300, 1e-10);
    assert!(lower <= val + 1e-12);
    assert!((trace(&sigma).re - 1.0).abs() < 1e-9);
    for _ in 0..50 {
        let s = random_density(&mut rng, 3);
        assert!(trace_norm(&kraus_overlap(&e, &f, &s)) >= lower - 1e-9);
    }
}

#[test]
fn purification_state_rank() {
    let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(0.5), cr(0.5), cr(0.0)]));
    let (psi, r) = purification_state(&rho).unwrap();
    assert_eq!(r, 2);
    assert!((trace(&psi).re - 1.0).abs() < 1e-12);
}
