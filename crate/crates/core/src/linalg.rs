//! Small dense linear algebra over [`Scalar`], rationals and integers.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::scalar::{Scalar, Surd};

pub type Matrix = Vec<Vec<Scalar>>;

fn pivot_row(m: &Matrix, col: usize, from: usize) -> Option<usize> {
    let exact = m.iter().all(|r| r.iter().all(Scalar::is_exact));
    if exact {
        (from..m.len()).find(|&r| !m[r][col].is_zero())
    } else {
        (from..m.len())
            .filter(|&r| !m[r][col].is_zero())
            .max_by(|&a, &b| {
                m[a][col].to_f64().abs().partial_cmp(&m[b][col].to_f64().abs()).unwrap_or(Ordering::Equal)
            })
    }
}

/// Determinant by Gaussian elimination.
pub fn det(m: &Matrix) -> Scalar {
    let n = m.len();
    let mut a = m.clone();
    let mut d = Scalar::one();
    for c in 0..n {
        let Some(p) = pivot_row(&a, c, c) else {
            return Scalar::zero();
        };
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        let piv = a[c][c].clone();
        d = &d * &piv;
        for r in c + 1..n {
            if a[r][c].is_zero() {
                continue;
            }
            let f = &a[r][c] / &piv;
            for k in c..n {
                let v = &a[r][k] - &(&f * &a[c][k]);
                a[r][k] = v;
            }
        }
    }
    d
}

/// Inverse by Gauss-Jordan elimination; `None` if singular.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    let mut a = m.clone();
    let mut inv: Matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Scalar::one() } else { Scalar::zero() }).collect())
        .collect();
    for c in 0..n {
        let p = pivot_row(&a, c, c)?;
        a.swap(p, c);
        inv.swap(p, c);
        let piv = a[c][c].recip()?;
        for k in 0..n {
            a[c][k] = &a[c][k] * &piv;
            inv[c][k] = &inv[c][k] * &piv;
        }
        for r in 0..n {
            if r == c || a[r][c].is_zero() {
                continue;
            }
            let f = a[r][c].clone();
            for k in 0..n {
                a[r][k] = &a[r][k] - &(&f * &a[c][k]);
                inv[r][k] = &inv[r][k] - &(&f * &inv[c][k]);
            }
        }
    }
    Some(inv)
}

pub fn transpose(m: &Matrix) -> Matrix {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mat_vec(m: &Matrix, v: &[Scalar]) -> Vec<Scalar> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(Scalar::zero(), |acc, (a, b)| &acc + &(a * b)))
        .collect()
}

pub fn to_f64(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect()
}

/// Union of radicands occurring in exact entries.
pub fn radical_basis<'a, I: IntoIterator<Item = &'a Surd>>(it: I) -> Vec<u64> {
    let mut set: BTreeSet<u64> = BTreeSet::new();
    set.insert(1);
    for s in it {
        set.extend(s.radicands());
    }
    set.into_iter().collect()
}

/// Rational coordinates of `s` in the basis `sqrt(r)` for `r` in `basis`.
pub fn rational_coords(s: &Surd, basis: &[u64]) -> Vec<BigRational> {
    basis.iter().map(|&r| s.coefficient(r)).collect()
}

/// Row echelon form in place; returns pivot columns.
fn echelon(a: &mut Vec<Vec<BigRational>>) -> Vec<usize> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let piv = a[r][c].clone();
        for k in c..cols {
            a[r][k] = &a[r][k] / &piv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for k in c..cols {
                    let v = &a[i][k] - &(&f * &a[r][k]);
                    a[i][k] = v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rational_rank(rows: &[Vec<BigRational>]) -> usize {
    let mut a = rows.to_vec();
    echelon(&mut a).len()
}

/// Solves `A x = b` over the rationals; `None` if inconsistent. Free
/// variables are set to zero.
pub fn solve_rational(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let cols = a.first().map_or(0, Vec::len);
    let mut aug: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(row, v)| {
            let mut r = row.clone();
            r.push(v.clone());
            r
        })
        .collect();
    let pivots = echelon(&mut aug);
    if pivots.last() == Some(&cols) {
        return None;
    }
    let mut x = vec![BigRational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = aug[i][cols].clone();
    }
    Some(x)
}

/// Basis of the rational null space of `A` (columns as unknowns).
pub fn rational_kernel(a: &[Vec<BigRational>], cols: usize) -> Vec<Vec<BigRational>> {
    let mut m = a.to_vec();
    let pivots = echelon(&mut m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = -m[i][f].clone();
            }
            v
        })
        .collect()
}

fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut old_r, mut r) = (a.clone(), b.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    let (mut old_t, mut t) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let q = &old_r / &r;
        let nr = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, nr);
        let ns = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, ns);
        let nt = &old_t - &q * &t;
        old_t = std::mem::replace(&mut t, nt);
    }
    if old_r.is_negative() {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Hermite normal form of the row lattice spanned by `gens`.
///
/// Returns `(basis, transform)` where each basis row equals the matching
/// transform row applied to the generator rows. Zero rows are dropped.
pub fn hermite_basis(gens: &[Vec<BigInt>]) -> (Vec<Vec<BigInt>>, Vec<Vec<BigInt>>) {
    let n = gens.len();
    let cols = gens.first().map_or(0, Vec::len);
    let mut a = gens.to_vec();
    let mut u: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();
    let mut r = 0;
    for c in 0..cols {
        if r == n {
            break;
        }
        for i in r + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let (g, s, t) = ext_gcd(&a[r][c], &a[i][c]);
            let p = &a[r][c] / &g;
            let q = &a[i][c] / &g;
            let combine = |x: &Vec<BigInt>, y: &Vec<BigInt>| -> (Vec<BigInt>, Vec<BigInt>) {
                let top = x.iter().zip(y).map(|(a, b)| &s * a + &t * b).collect();
                let bot = x.iter().zip(y).map(|(a, b)| &p * b - &q * a).collect();
                (top, bot)
            };
            let (top, bot) = combine(&a[r], &a[i]);
            a[r] = top;
            a[i] = bot;
            let (top, bot) = combine(&u[r], &u[i]);
            u[r] = top;
            u[i] = bot;
        }
        if a[r][c].is_zero() {
            continue;
        }
        if a[r][c].is_negative() {
            a[r].iter_mut().for_each(|x| *x = -x.clone());
            u[r].iter_mut().for_each(|x| *x = -x.clone());
        }
        for i in 0..r {
            let q = num_integer::Integer::div_floor(&a[i][c], &a[r][c]);
            if q.is_zero() {
                continue;
            }
            for k in 0..cols {
                let v = &a[i][k] - &q * &a[r][k];
                a[i][k] = v;
            }
            for k in 0..n {
                let v = &u[i][k] - &q * &u[r][k];
                u[i][k] = v;
            }
        }
        r += 1;
    }
    a.truncate(r);
    u.truncate(r);
    (a, u)
}
