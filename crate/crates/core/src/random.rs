//! Seeded random matrices, states and channels.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{cr, CMatrix, CVector};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng))
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| complex_gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = ginibre(rng, d, d);
    (&g + g.adjoint()) * cr(0.5)
}

/// Random isometry (r×c with r ≥ c) from the QR decomposition of a Ginibre matrix.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMatrix {
    assert!(r >= c, "isometry needs rows >= cols");
    let g = ginibre(rng, r, c);
    let qr = g.qr();
    let q = qr.q();
    let rr = qr.r();
    let mut out = q.columns(0, c).into_owned();
    for j in 0..c {
        let d = rr[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for i in 0..r {
                out[(i, j)] *= ph;
            }
        }
    }
    out
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    random_isometry(rng, d, d)
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CVector {
    let v = CVector::from_fn(d, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / cr(n)
}

/// Full-rank random density matrix (induced measure with square Ginibre).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    random_density_rank(rng, d, d)
}

pub fn random_density_rank<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> CMatrix {
    let g = ginibre(rng, d, rank);
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m / cr(t)
}

/// Kraus operators (out×in) of a random channel with `rank` Kraus operators,
/// obtained by slicing a random Stinespring isometry.
pub fn random_kraus<R: Rng + ?Sized>(
    rng: &mut R,
    din: usize,
    dout: usize,
    rank: usize,
) -> Vec<CMatrix> {
    let v = random_isometry(rng, dout * rank, din);
    (0..rank)
        .map(|k| CMatrix::from_fn(dout, din, |a, i| v[(a * rank + k, i)]))
        .collect()
}

/// Rescale a nonempty Kraus family so that Σ E†E = 1 (requires the sum to be
/// invertible).
pub fn normalize_kraus(kraus: &[CMatrix]) -> Option<Vec<CMatrix>> {
    let din = kraus.first()?.ncols();
    let mut s = CMatrix::zeros(din, din);
    for e in kraus {
        s += e.adjoint() * e;
    }
    let (vals, vecs) = crate::matrix::eigh(&s);
    if vals.first().copied().unwrap_or(0.0) <= 1e-12 {
        return None;
    }
    let mut scaled = vecs.clone();
    for j in 0..din {
        let f = cr(1.0 / vals[j].sqrt());
        for i in 0..din {
            scaled[(i, j)] *= f;
        }
    }
    let inv_sqrt = scaled * vecs.adjoint();
    Some(kraus.iter().map(|e| e * &inv_sqrt).collect())
}
