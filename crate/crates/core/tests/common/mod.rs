//! Test-only oracles, independent of the library's solution paths.
#![allow(dead_code)]

use distorted_balance::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Stationary distribution by the Markov-chain tree theorem: each level's
/// weight is the sum over spanning trees directed into it of the product of
/// the tree's jump rates.
pub fn tree_theorem(r: &RateSet) -> [f64; 3] {
    use Transition::*;
    let (a21, a31, a32) = (r.minus(T21), r.minus(T31), r.minus(T32));
    let (b21, b31, b32) = (r.plus(T21), r.plus(T31), r.plus(T32));
    // jumps: 1->2 b21, 1->3 b31, 2->1 a21, 2->3 b32, 3->1 a31, 3->2 a32
    let w1 = a21 * a31 + a21 * a32 + a31 * b32;
    let w2 = b21 * a32 + b21 * a31 + b31 * a32;
    let w3 = b31 * b32 + b31 * a21 + b21 * b32;
    let z = w1 + w2 + w3;
    [w1 / z, w2 / z, w3 / z]
}

/// Population generator rebuilt from the rate equations, factor 2 included.
pub fn generator_oracle(r: &RateSet) -> [[f64; 3]; 3] {
    use Transition::*;
    let g = |t: Transition| (2.0 * r.minus(t), 2.0 * r.plus(t));
    let (d21, u21) = g(T21);
    let (d31, u31) = g(T31);
    let (d32, u32) = g(T32);
    [
        [-(u21 + u31), d21, d31],
        [u21, -(d21 + u32), d32],
        [u31, u32, -(d32 + d31)],
    ]
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// `exp(M t)` by scaling and squaring with a 24-term Taylor series.
pub fn expm(m: &[[f64; 3]; 3], t: f64) -> [[f64; 3]; 3] {
    let norm = m
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / 2f64.powi(squarings as i32);
    let a = m.map(|row| row.map(|v| v * scale));
    let mut result = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = result;
    for k in 1..=24 {
        term = matmul(&term, &a).map(|row| row.map(|v| v / k as f64));
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

pub fn propagate(m: &[[f64; 3]; 3], p0: [f64; 3], t: f64) -> [f64; 3] {
    let e = expm(m, t);
    [0, 1, 2].map(|i| (0..3).map(|j| e[i][j] * p0[j]).sum())
}

pub fn random_atom(rng: &mut ChaCha8Rng) -> ThreeLevelAtom {
    loop {
        let e1 = rng.gen_range(-2.0..2.0);
        let d1: f64 = rng.gen_range(0.2..2.0);
        let d2: f64 = rng.gen_range(0.2..2.0);
        if (d1 - d2).abs() < 0.05 {
            continue;
        }
        let k = Couplings::new(rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0));
        return ThreeLevelAtom::new([e1, e1 + d1, e1 + d1 + d2], k).unwrap();
    }
}

/// Irreducible rates with `gamma+ < gamma-`, as induced by any positive occupation.
pub fn random_rates(rng: &mut ChaCha8Rng) -> RateSet {
    let mut m = [0.0; 3];
    let mut p = [0.0; 3];
    for i in 0..3 {
        m[i] = rng.gen_range(0.2..2.0);
        p[i] = m[i] * rng.gen_range(0.05..0.95);
    }
    RateSet::new(m, p).unwrap()
}

pub fn reference_atom() -> ThreeLevelAtom {
    ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::uniform(1.0)).unwrap()
}

/// The illustrative emission regime: beta(w21)=1, beta(w32)=2, beta(w31)=2.5.
pub fn emission_spectra() -> Spectra {
    Spectra::shared(OccupationSpectrum::per_frequency(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 2.5)]).unwrap())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
