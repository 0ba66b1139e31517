//! Divisor-indexed matrices that certify the scrape search.
//!
//! Fix a modulus `M`.  For multisets with entries dividing `M`, the vector of
//! scrape-closure Euler characteristics over the divisors of `M` is a linear
//! function of the divisor multiplicity vector `(Delta_d)_{d | M}`.  This
//! module builds that linear map explicitly: `E` and `F` hold the raw
//! coefficients `1/d_s` and `1/d_s'` (element scrape, and its closure
//! relative to the parent entry), while `X` and `Y` are the row-reduced forms
//! obtained by clearing each row against the rows of its proper divisors.
//!
//! The rank and pivot statements checked here are what make the divisor scan
//! in [`crate::scrapes`] complete: once multiplicities satisfy the usual
//! abelianization constraints, equal closure characteristics at every scrape
//! force equal multisets.  The distinguisher itself never solves a linear
//! system; this module exists as a proof-checking suite and regression armor.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::{divisors, factor, moebius_sum_over_divisors, totient};
use crate::{Error, Result};

/// A square matrix indexed by the divisors of a modulus, rows `s` by
/// columns `d`, with optional extra constraint rows appended at the bottom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScrapeMatrix {
    modulus: u64,
    index: Vec<u64>,
    rows: Vec<Vec<BigRational>>,
}

impl ScrapeMatrix {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Ascending divisor list labelling the columns (and the square rows).
    pub fn index(&self) -> &[u64] {
        &self.index
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    /// Entry at divisor row `s`, divisor column `d`; `None` off the index.
    pub fn entry(&self, s: u64, d: u64) -> Option<&BigRational> {
        let r = self.index.iter().position(|&v| v == s)?;
        let c = self.index.iter().position(|&v| v == d)?;
        Some(&self.rows[r][c])
    }

    /// Exact rank by Gaussian elimination over the rationals.
    pub fn rank(&self) -> usize {
        rank_of(&self.rows)
    }
}

#[cfg(test)]
fn rational(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn reciprocal(n: u64) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(n))
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn exponent_in(p: u64, mut n: u64) -> u32 {
    let mut e = 0;
    while n.is_multiple_of(p) {
        e += 1;
        n /= p;
    }
    e
}

/// The element scrape `d_s = gcd(d, modulus/s)` of a divisor `d`.
fn element_scrape(d: u64, s: u64, modulus: u64) -> u64 {
    num_integer::gcd(d, modulus / s)
}

/// Closure of the element scrape `d_s` relative to the parent entry `d`.
fn element_scrape_closure(d: u64, s: u64, modulus: u64) -> u64 {
    let ds = element_scrape(d, s, modulus);
    crate::scrapes::closure(&[ds], &[d]).expect("an element scrape divides its parent")[0]
}

/// The pivot divisor `s~` of `s`: the row index at which column `s` has its
/// pivot once the matrix `X` is built.  For `s = prod p^j` dividing the
/// modulus `M = prod p^a` it is `prod p^(a - j + 1)`, and `pivot_of(1) = 1`.
/// The map is an involution on the divisors of `M`.
///
/// # Panics
/// Panics if `s` does not divide `modulus`.
pub fn pivot_of(s: u64, modulus: u64) -> u64 {
    assert!(
        s >= 1 && modulus.is_multiple_of(s),
        "pivot_of: {s} must be a divisor of {modulus}"
    );
    let mut out = 1u64;
    for (p, j) in factor(s) {
        let a = exponent_in(p, modulus);
        out *= p.pow(a - j as u32 + 1);
    }
    out
}

fn build_from_entry(modulus: u64, entry: impl Fn(u64, u64) -> BigRational) -> ScrapeMatrix {
    assert!(modulus >= 1, "modulus must be positive");
    let index = divisors(modulus);
    let rows = index
        .iter()
        .map(|&s| index.iter().map(|&d| entry(s, d)).collect())
        .collect();
    ScrapeMatrix {
        modulus,
        index,
        rows,
    }
}

/// The matrix `E` with entries `e_{s,d} = 1/d_s`.  A multiset `m` with lcm
/// dividing the modulus satisfies `chi(m_s) = 2 - sum_d Delta_d e_{s,d}`
/// where `Delta_d` counts the entries of `m` equal to `d`.
pub fn build_e(modulus: u64) -> ScrapeMatrix {
    build_from_entry(modulus, |s, d| reciprocal(element_scrape(d, s, modulus)))
}

/// The matrix `F` with entries `f_{s,d} = 1/d_s'`, the closure of the element
/// scrape relative to its parent entry.  It plays the role of `E` for the
/// characteristics of closed scrapes.
pub fn build_f(modulus: u64) -> ScrapeMatrix {
    build_from_entry(modulus, |s, d| {
        reciprocal(element_scrape_closure(d, s, modulus))
    })
}

/// Closed form for the entries of `X`: zero unless `pivot_of(s)` divides
/// `d`, and `phi(d/d_s)/d` otherwise.
pub fn x_entry(s: u64, d: u64, modulus: u64) -> BigRational {
    if !d.is_multiple_of(pivot_of(s, modulus)) {
        return BigRational::zero();
    }
    ratio(totient(d / element_scrape(d, s, modulus)), d)
}

fn x_entry_by_moebius(s: u64, d: u64, modulus: u64) -> BigRational {
    moebius_sum_over_divisors(s, |c| reciprocal(element_scrape(d, c, modulus)))
}

fn y_entry_by_moebius(s: u64, d: u64, modulus: u64) -> BigRational {
    moebius_sum_over_divisors(s, |c| reciprocal(element_scrape_closure(d, c, modulus)))
}

/// The correction `x_{s,d} - y_{s,d}`.  It is nonzero only when `s` is the
/// product of full modulus prime powers matched to the prime pattern of `d`
/// as follows, writing `2^a | M`, `3^b | M` exactly and `core(d)` for the
/// primes of `d` outside `{2,3}` raised to their full exponents in `M`:
///
/// * `2 | d`, `3 ∤ d`, `s = 2^a core(d)`: `1/2`
/// * `3 | d`, `2 ∤ d`, `s = 3^b core(d)`: `2/3`
/// * `4 | d`, `3 | d`, `s = 2^(a-1) 3^b core(d)`: `1/6`
/// * `2 || d`, `3 | d`, `s = 3^b core(d)`: `1/6`
/// * `2 | d`, `3 | d`, `s = 2^a 3^b core(d)`: `1/2`
///
/// At most one case applies to any pair.
pub fn correction(s: u64, d: u64, modulus: u64) -> BigRational {
    let a = exponent_in(2, modulus);
    let b = exponent_in(3, modulus);
    let j = exponent_in(2, d);
    let l = exponent_in(3, d);
    let core: u64 = factor(d)
        .iter()
        .filter(|&&(p, _)| p != 2 && p != 3)
        .map(|&(p, _)| p.pow(exponent_in(p, modulus)))
        .product();
    if j >= 1 && l == 0 && s == 2u64.pow(a) * core {
        return ratio(1, 2);
    }
    if j == 0 && l >= 1 && s == 3u64.pow(b) * core {
        return ratio(2, 3);
    }
    if j >= 2 && l >= 1 && s == 2u64.pow(a - 1) * 3u64.pow(b) * core {
        return ratio(1, 6);
    }
    if j == 1 && l >= 1 && s == 3u64.pow(b) * core {
        return ratio(1, 6);
    }
    if j >= 1 && l >= 1 && s == 2u64.pow(a) * 3u64.pow(b) * core {
        return ratio(1, 2);
    }
    BigRational::zero()
}

/// Closed form for the entries of `Y`: `x_{s,d}` minus the correction table.
pub fn y_entry(s: u64, d: u64, modulus: u64) -> BigRational {
    x_entry(s, d, modulus) - correction(s, d, modulus)
}

/// The matrix `X`, built from the closed-form entries.
pub fn build_x(modulus: u64) -> ScrapeMatrix {
    build_from_entry(modulus, |s, d| x_entry(s, d, modulus))
}

/// `X` built from the Mobius sums `x_{s,d} = sum_{c|s} mu(s/c)/d_c`.
pub fn build_x_by_moebius(modulus: u64) -> ScrapeMatrix {
    build_from_entry(modulus, |s, d| x_entry_by_moebius(s, d, modulus))
}

/// `Y` built from the Mobius sums `y_{s,d} = sum_{c|s} mu(s/c)/d_c'`.
pub fn build_y_by_moebius(modulus: u64) -> ScrapeMatrix {
    build_from_entry(modulus, |s, d| y_entry_by_moebius(s, d, modulus))
}

/// The matrix `Y`, built as `X` minus the correction table.
pub fn build_y(modulus: u64) -> ScrapeMatrix {
    build_from_entry(modulus, |s, d| y_entry(s, d, modulus))
}

/// Reduces each row of `source` by the already-reduced rows of its proper
/// divisors: `R_1 := S_1` and `R_s := S_s - sum_{c | s, c != s} R_c`.
/// Applied to `E` this reproduces `X`; applied to `F` it reproduces `Y`.
fn reduce_by_divisor_rows(source: &ScrapeMatrix) -> ScrapeMatrix {
    let index = source.index.clone();
    let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(index.len());
    for (i, &s) in index.iter().enumerate() {
        let mut row = source.rows[i].clone();
        for (k, &c) in index.iter().enumerate().take(i) {
            if s % c == 0 {
                for (dst, src) in row.iter_mut().zip(&rows[k]) {
                    *dst -= src;
                }
            }
        }
        rows.push(row);
    }
    ScrapeMatrix {
        modulus: source.modulus,
        index,
        rows,
    }
}

/// `X` built by row-reducing `E`, the defining recursion.
pub fn build_x_by_reduction(modulus: u64) -> ScrapeMatrix {
    reduce_by_divisor_rows(&build_e(modulus))
}

/// `Y` built by row-reducing `F`, the defining recursion.
pub fn build_y_by_reduction(modulus: u64) -> ScrapeMatrix {
    reduce_by_divisor_rows(&build_f(modulus))
}

/// Appends the constraint rows that restore full rank to `F` or `Y`, one per
/// column of `{2, 3, 12}` dividing the modulus: entries of multiplicity-
/// difference vectors from pairs with equal abelianization satisfy
/// `sum_{2||d} Delta_d = 0` and `sum_{3||d} Delta_d = 0`, and equal lengths
/// give `sum_{d|M} Delta_d = 0`.
pub fn append_patch_rows(matrix: &ScrapeMatrix) -> ScrapeMatrix {
    let mut out = matrix.clone();
    let modulus = matrix.modulus;
    let indicator = |hit: bool| if hit { BigRational::one() } else { BigRational::zero() };
    if modulus.is_multiple_of(2) {
        out.rows
            .push(out.index.iter().map(|&d| indicator(d % 2 == 0 && d % 4 != 0)).collect());
    }
    if modulus.is_multiple_of(3) {
        out.rows
            .push(out.index.iter().map(|&d| indicator(d % 3 == 0 && d % 9 != 0)).collect());
    }
    if modulus.is_multiple_of(12) {
        out.rows.push(vec![BigRational::one(); out.index.len()]);
    }
    out
}

/// The columns `d` whose pivot entry `y_{pivot_of(d), d}` vanishes.
pub fn pivotless_columns(y: &ScrapeMatrix) -> Vec<u64> {
    y.index
        .iter()
        .copied()
        .filter(|&d| {
            y.entry(pivot_of(d, y.modulus), d)
                .expect("pivot row is in the index")
                .is_zero()
        })
        .collect()
}

/// Whether reordering the rows of `matrix` by `s -> pivot_of(s)` yields an
/// upper triangular matrix with nonzero diagonal.
pub fn upper_triangular_under_pivot_permutation(matrix: &ScrapeMatrix) -> bool {
    let n = matrix.index.len();
    for i in 0..n {
        let s = pivot_of(matrix.index[i], matrix.modulus);
        for j in 0..n {
            let entry = matrix
                .entry(s, matrix.index[j])
                .expect("divisor indices are in range");
            if j < i && !entry.is_zero() {
                return false;
            }
            if j == i && entry.is_zero() {
                return false;
            }
        }
    }
    true
}

fn rank_of(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let height = m.len();
    let width = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..width {
        let Some(pivot) = (rank..height).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let lead = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            if row[col].is_zero() {
                continue;
            }
            let coeff = &row[col] / &lead[col];
            for (dst, src) in row.iter_mut().zip(&lead).skip(col) {
                *dst -= src * &coeff;
            }
        }
        rank += 1;
        if rank == height {
            break;
        }
    }
    rank
}

/// Summary of every matrix-level claim for one modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixReport {
    pub modulus: u64,
    pub divisor_count: usize,
    pub rank_e: usize,
    pub rank_f: usize,
    pub rank_f_patched: usize,
    /// Columns of `Y` without a pivot; expected `{2, 3, 12} ∩ divisors`.
    pub pivotless_columns: Vec<u64>,
    /// Closed form, Mobius sums, and row reduction of `E` agree on `X`.
    pub x_routes_agree: bool,
    /// Closed form, Mobius sums, and row reduction of `F` agree on `Y`.
    pub y_routes_agree: bool,
    /// The pivot row permutation triangularizes `X` with nonzero diagonal.
    pub x_triangular_under_pivot: bool,
}

/// Builds all matrices for `modulus` and records how each claim fared.
pub fn matrix_report(modulus: u64) -> MatrixReport {
    let e = build_e(modulus);
    let f = build_f(modulus);
    let x = build_x(modulus);
    let y = build_y(modulus);
    let pivotless = pivotless_columns(&y);
    MatrixReport {
        modulus,
        divisor_count: x.index.len(),
        rank_e: e.rank(),
        rank_f: f.rank(),
        rank_f_patched: append_patch_rows(&f).rank(),
        pivotless_columns: pivotless,
        x_routes_agree: x == build_x_by_moebius(modulus) && x == build_x_by_reduction(modulus),
        y_routes_agree: y == build_y_by_moebius(modulus) && y == build_y_by_reduction(modulus),
        x_triangular_under_pivot: upper_triangular_under_pivot_permutation(&x),
    }
}

/// Checks every matrix-level claim for one modulus, reporting the first
/// failure: the three constructions of `X` agree, likewise for `Y`, `X` is
/// triangular under the pivot permutation, `E` has full rank, the pivotless
/// columns of `Y` are exactly `{2, 3, 12} ∩ divisors`, the nullity of `F`
/// equals their number, and the patched `F` recovers full rank.
pub fn verify_matrix_claims(modulus: u64) -> Result<()> {
    let report = matrix_report(modulus);
    let fail = |what: String| Err(Error::Internal(format!("modulus {modulus}: {what}")));
    if !report.x_routes_agree {
        return fail("the three constructions of X disagree".into());
    }
    if !report.y_routes_agree {
        return fail("the three constructions of Y disagree".into());
    }
    if !report.x_triangular_under_pivot {
        return fail("X is not triangular under the pivot permutation".into());
    }
    let tau = report.divisor_count;
    if report.rank_e != tau {
        return fail(format!("rank(E) = {} instead of {tau}", report.rank_e));
    }
    let expected: Vec<u64> = [2u64, 3, 12]
        .into_iter()
        .filter(|&d| modulus.is_multiple_of(d))
        .collect();
    if report.pivotless_columns != expected {
        return fail(format!(
            "pivotless columns {:?} instead of {:?}",
            report.pivotless_columns, expected
        ));
    }
    if report.rank_f != tau - expected.len() {
        return fail(format!(
            "rank(F) = {} instead of {}",
            report.rank_f,
            tau - expected.len()
        ));
    }
    if report.rank_f_patched != tau {
        return fail(format!(
            "rank of patched F = {} instead of {tau}",
            report.rank_f_patched
        ));
    }
    Ok(())
}

/// Row-reduces the equal-length constraint row (all ones, the patch row for
/// column 12) against the pivot rows of the other divisor columns `<= 12`,
/// restricted to those columns, and confirms that a pivot survives at column
/// 12.  The columns 2 and 3 use their patch rows; the rest use the `Y` rows
/// at their pivot divisor.
///
/// `extras` selects which of the optional divisors `{5, 7, 8, 9, 11}` divide
/// the modulus; the modulus checked is `lcm(12, extras)` and is returned.
/// Ranging over all 32 subsets exercises every divisibility pattern the
/// reduction can encounter, because the pivot-indexed entries do not depend
/// on the ambient modulus.
pub fn twelve_column_pivot_check(extras: &[u64]) -> Result<u64> {
    let mut modulus = 12u64;
    for &e in extras {
        if ![5, 7, 8, 9, 11].contains(&e) {
            return Err(Error::Precondition(format!(
                "extra divisor {e} is not one of 5, 7, 8, 9, 11"
            )));
        }
        modulus = crate::arith::checked_lcm(modulus, e)?;
    }
    let columns: Vec<u64> = divisors(modulus).into_iter().filter(|&d| d <= 12).collect();
    let width = columns.len();
    let indicator = |hit: bool| if hit { BigRational::one() } else { BigRational::zero() };
    let mut target = vec![BigRational::one(); width];
    for (i, &j) in columns.iter().enumerate() {
        if j == 12 {
            continue;
        }
        let row: Vec<BigRational> = match j {
            2 => columns.iter().map(|&d| indicator(d % 2 == 0 && d % 4 != 0)).collect(),
            3 => columns.iter().map(|&d| indicator(d % 3 == 0 && d % 9 != 0)).collect(),
            _ => {
                let s = pivot_of(j, modulus);
                columns.iter().map(|&d| y_entry(s, d, modulus)).collect()
            }
        };
        if row[..i].iter().any(|v| !v.is_zero()) || row[i].is_zero() {
            return Err(Error::Internal(format!(
                "modulus {modulus}: the row for column {j} does not lead at {j}"
            )));
        }
        let coeff = &target[i] / &row[i];
        for (dst, src) in target.iter_mut().zip(&row).skip(i) {
            *dst -= src * &coeff;
        }
    }
    let last = width - 1;
    debug_assert_eq!(columns[last], 12);
    if target[..last].iter().any(|v| !v.is_zero()) {
        return Err(Error::Internal(format!(
            "modulus {modulus}: entries before column 12 survived the reduction"
        )));
    }
    if target[last].is_zero() {
        return Err(Error::Internal(format!(
            "modulus {modulus}: no pivot at column 12 after the reduction"
        )));
    }
    Ok(modulus)
}
