//! Exact elementary number theory: factorization, divisors, multiplicative
//! functions, p-adic valuations, and the Chinese remainder theorem.
//!
//! Everything here is integer- or rational-exact. Factored integers keep
//! `u128` exponents because certificate orders of the form `a^f * |G|` have
//! exponents far outside `u64` range even though every prime involved is
//! small.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::{Error, Result};

/// A positive integer in factored form: `(prime, exponent)` pairs sorted by
/// strictly increasing prime, all exponents positive. The empty list is 1.
pub type FactoredInteger = Vec<(u64, u128)>;

/// Witness bases making Miller-Rabin deterministic for all `u64` inputs.
const MILLER_RABIN_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn pow_mod(mut base: u128, mut exp: u128, modulus: u128) -> u128 {
    debug_assert!(modulus > 0 && modulus <= u64::MAX as u128);
    let mut acc: u128 = 1;
    base %= modulus;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % modulus;
        }
        base = base * base % modulus;
        exp >>= 1;
    }
    acc
}

/// Deterministic primality test for `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MILLER_RABIN_BASES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    'witness: for &a in &MILLER_RABIN_BASES {
        let mut x = pow_mod(a as u128, d as u128, n as u128);
        if x == 1 || x == (n - 1) as u128 {
            continue;
        }
        for _ in 1..s {
            x = x * x % n as u128;
            if x == (n - 1) as u128 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Factor a positive integer by trial division.
///
/// Panics if `n == 0`.
pub fn factor(n: u64) -> FactoredInteger {
    assert!(n > 0, "factor is defined for positive integers");
    let mut n = n;
    let mut out = FactoredInteger::new();
    let mut d = 2u64;
    while d <= n / d {
        if n.is_multiple_of(d) {
            let mut e = 0u128;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Factor a positive `u128` whose prime factors all fit in `u64`.
///
/// Used for orders like `(q^3 - q)/2` that exceed `u64` but are built from
/// small primes. Errors if a prime factor larger than `u64` remains.
pub fn factor_u128(n: u128) -> Result<FactoredInteger> {
    if n == 0 {
        return Err(Error::Precondition("factor_u128 requires a positive integer".into()));
    }
    let mut n = n;
    let mut out = FactoredInteger::new();
    let mut d = 2u128;
    while d <= n / d {
        if n.is_multiple_of(d) {
            let mut e = 0u128;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d as u64, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        if n > u64::MAX as u128 {
            return Err(Error::Precondition(format!(
                "prime factor {n} exceeds u64 range"
            )));
        }
        out.push((n as u64, 1));
    }
    Ok(out)
}

/// All positive divisors of `n`, sorted ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    for (p, e) in factor(n) {
        let prev = out.clone();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            out.extend(prev.iter().map(|&d| d * pk));
        }
    }
    out.sort_unstable();
    out
}

/// The Mobius function: 0 on non-squarefree input, else `(-1)^omega(n)`.
pub fn moebius(n: u64) -> i8 {
    assert!(n > 0, "moebius is defined for positive integers");
    let f = factor(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Euler's totient function.
pub fn totient(n: u64) -> u64 {
    assert!(n > 0, "totient is defined for positive integers");
    let mut out = n;
    for (p, _) in factor(n) {
        out = out / p * (p - 1);
    }
    out
}

/// The Mobius-weighted divisor sum `sum_{d | n} mu(n/d) f(d)`.
pub fn moebius_sum_over_divisors<T, F>(n: u64, mut f: F) -> T
where
    T: Zero + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
    F: FnMut(u64) -> T,
{
    let mut acc = T::zero();
    for d in divisors(n) {
        match moebius(n / d) {
            1 => acc = acc + f(d),
            -1 => acc = acc - f(d),
            _ => {}
        }
    }
    acc
}

/// The value of an `ell`-adic valuation: finite, or infinite at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl std::fmt::Display for Valuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

fn multiplicity(mut n: BigUint, ell: &BigUint) -> i64 {
    let mut v = 0i64;
    while !n.is_zero() && (&n % ell).is_zero() {
        n /= ell;
        v += 1;
    }
    v
}

/// The `ell`-adic valuation of a rational number. `ell` must be prime;
/// the valuation of zero is infinite.
pub fn valuation(ell: u64, x: &BigRational) -> Result<Valuation> {
    if !is_prime(ell) {
        return Err(Error::NotPrime(ell));
    }
    if x.is_zero() {
        return Ok(Valuation::Infinite);
    }
    let ell = BigUint::from(ell);
    let num = multiplicity(x.numer().magnitude().clone(), &ell);
    let den = multiplicity(x.denom().magnitude().clone(), &ell);
    Ok(Valuation::Finite(num - den))
}

fn mod_inverse(a: u128, m: u128) -> Option<u128> {
    debug_assert!(m > 0 && m <= i128::MAX as u128);
    let (mut old_r, mut r) = (a as i128 % m as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r.abs() != 1 {
        return None;
    }
    let mut inv = old_s * old_r.signum();
    inv %= m as i128;
    if inv < 0 {
        inv += m as i128;
    }
    Some(inv as u128)
}

/// Solve simultaneous congruences `x = r_i (mod m_i)` with pairwise coprime
/// moduli. Returns `(x, M)` where `M` is the product of the moduli and
/// `0 <= x < M`.
pub fn crt_solve(congruences: &[(u128, u128)]) -> Result<(u128, u128)> {
    for (i, &(_, mi)) in congruences.iter().enumerate() {
        if mi == 0 {
            return Err(Error::Precondition("zero modulus in congruence system".into()));
        }
        for &(_, mj) in &congruences[i + 1..] {
            if mi.gcd(&mj) != 1 {
                return Err(Error::NonCoprimeModuli(mi, mj));
            }
        }
    }
    let overflow = || Error::Precondition("congruence system modulus overflows u128".into());
    let (mut x, mut m) = (0u128, 1u128);
    for &(r, modulus) in congruences {
        let r = r % modulus;
        // Lift x to satisfy the new congruence: x + m*t = r (mod modulus).
        let inv = mod_inverse(m % modulus, modulus)
            .expect("coprimality was checked, so m is invertible");
        let diff = (modulus + r - x % modulus) % modulus;
        let t = diff * inv % modulus;
        x = m.checked_mul(t).and_then(|mt| x.checked_add(mt)).ok_or_else(overflow)?;
        m = m.checked_mul(modulus).ok_or_else(overflow)?;
    }
    Ok((x, m))
}

/// Least common multiple with overflow detection.
pub fn checked_lcm(a: u64, b: u64) -> Result<u64> {
    if a == 0 || b == 0 {
        return Err(Error::Precondition("lcm of zero is undefined here".into()));
    }
    let g = a.gcd(&b);
    (a / g)
        .checked_mul(b)
        .ok_or_else(|| Error::Precondition(format!("lcm({a}, {b}) overflows u64")))
}

/// Least common multiple of an iterator of positive integers (1 if empty).
pub fn lcm_all<I: IntoIterator<Item = u64>>(values: I) -> Result<u64> {
    let mut acc = 1u64;
    for v in values {
        acc = checked_lcm(acc, v)?;
    }
    Ok(acc)
}

/// Recognize `n` as an odd prime power `ell^e` with `1 <= e <= 3`.
pub fn odd_prime_power(n: u64) -> Option<(u64, u32)> {
    if n < 3 || n.is_multiple_of(2) {
        return None;
    }
    if is_prime(n) {
        return Some((n, 1));
    }
    let r = isqrt(n);
    if r * r == n && is_prime(r) {
        return Some((r, 2));
    }
    let r = icbrt(n);
    if r * r * r == n && is_prime(r) {
        return Some((r, 3));
    }
    None
}

fn isqrt(n: u64) -> u64 {
    let mut x = (n as f64).sqrt() as u64;
    while x > 0 && (x as u128) * (x as u128) > n as u128 {
        x -= 1;
    }
    while ((x + 1) as u128) * ((x + 1) as u128) <= n as u128 {
        x += 1;
    }
    x
}

fn icbrt(n: u64) -> u64 {
    let mut x = (n as f64).cbrt() as u64;
    while x > 0 && (x as u128).pow(3) > n as u128 {
        x -= 1;
    }
    while ((x + 1) as u128).pow(3) <= n as u128 {
        x += 1;
    }
    x
}

/// Multiply two factored integers.
pub fn factored_mul(a: &FactoredInteger, b: &FactoredInteger) -> FactoredInteger {
    let mut out = a.clone();
    for &(p, e) in b {
        match out.binary_search_by_key(&p, |&(q, _)| q) {
            Ok(i) => out[i].1 += e,
            Err(i) => out.insert(i, (p, e)),
        }
    }
    out
}

/// Raise a factored integer to a power. The zeroth power is 1.
pub fn factored_pow(a: &FactoredInteger, e: u128) -> FactoredInteger {
    if e == 0 {
        return FactoredInteger::new();
    }
    a.iter().map(|&(p, k)| (p, k * e)).collect()
}

/// Expand a factored integer to its value. Only safe for small exponents.
pub fn factored_value(a: &FactoredInteger) -> Result<BigUint> {
    let mut out = BigUint::one();
    for &(p, e) in a {
        let e32: u32 = e
            .try_into()
            .map_err(|_| Error::Precondition(format!("exponent {e} too large to expand")))?;
        out *= BigUint::from(p).pow(e32);
    }
    Ok(out)
}

/// Truncating scientific-notation rendering of a factored integer, in the
/// form `d.dde<exp>`, computed with integer arithmetic only.
pub fn decimal_approx(a: &FactoredInteger) -> String {
    // Mantissa/exponent pairs with the mantissa truncated to 30 significant
    // digits after every multiplication; ample for two displayed decimals.
    const DIGITS: usize = 30;
    fn normalize(mant: BigUint, exp: u128) -> (BigUint, u128) {
        let s = mant.to_string();
        if s.len() <= DIGITS {
            (mant, exp)
        } else {
            let cut = s.len() - DIGITS;
            (s[..DIGITS].parse().expect("digit prefix"), exp + cut as u128)
        }
    }
    fn mul(x: &(BigUint, u128), y: &(BigUint, u128)) -> (BigUint, u128) {
        normalize(&x.0 * &y.0, x.1 + y.1)
    }
    let mut acc = (BigUint::one(), 0u128);
    for &(p, e) in a {
        let mut base = (BigUint::from(p), 0u128);
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = mul(&acc, &base);
            }
            base = mul(&base, &base);
            e >>= 1;
        }
    }
    let digits = acc.0.to_string();
    let mut exp = acc.1 + (digits.len() as u128 - 1);
    // Round half-up on the digit after the displayed two decimals.
    let first4: u32 = digits
        .chars()
        .chain(std::iter::repeat('0'))
        .take(4)
        .collect::<String>()
        .parse()
        .expect("digit prefix");
    let mut rounded = (first4 + 5) / 10;
    if rounded == 1000 {
        rounded = 100;
        exp += 1;
    }
    format!("{}.{:02}e{exp}", rounded / 100, rounded % 100)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn primality_spot_checks() {
        assert!(is_prime(2));
        assert!(is_prime(3));
        assert!(is_prime(13));
        assert!(is_prime(2_147_483_647));
        assert!(is_prime((1u64 << 61) - 1));
        assert!(!is_prime(0));
        assert!(!is_prime(1));
        assert!(!is_prime(561), "Carmichael numbers must be rejected");
        assert!(!is_prime(25326001));
        assert!(!is_prime(u64::MAX));
    }

    #[test]
    fn factor_round_trips() {
        assert_eq!(factor(1), vec![]);
        assert_eq!(factor(12), vec![(2, 2), (3, 1)]);
        assert_eq!(factor(630), vec![(2, 1), (3, 2), (5, 1), (7, 1)]);
        assert_eq!(factor_u128(12).unwrap(), vec![(2, 2), (3, 1)]);
        // |PSL(2, 9973)| = (9973^3 - 9973)/2.
        let q: u128 = 9973;
        let order = (q * q * q - q) / 2;
        let f = factor_u128(order).unwrap();
        let back: u128 = f
            .iter()
            .map(|&(p, e)| (p as u128).pow(e as u32))
            .product();
        assert_eq!(back, order);
    }

    #[test]
    fn divisors_are_sorted_and_complete() {
        assert_eq!(divisors(1), vec![1]);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(630).len(), 24);
    }

    #[test]
    fn moebius_values() {
        assert_eq!(moebius(1), 1);
        assert_eq!(moebius(6), 1);
        assert_eq!(moebius(12), 0);
        assert_eq!(moebius(30), -1);
    }

    #[test]
    fn totient_values() {
        assert_eq!(totient(1), 1);
        assert_eq!(totient(9), 6);
        assert_eq!(totient(660), 160);
    }

    #[test]
    fn moebius_inversion_round_trip() {
        // With g(n) = sum_{d|n} f(d), the Mobius sum over divisors of g
        // recovers f. Checked exhaustively for f(n) = n^2 up to 10^4.
        for n in 1u64..=10_000 {
            let g = |m: u64| -> i128 { divisors(m).iter().map(|&d| (d as i128).pow(2)).sum() };
            let recovered: i128 = moebius_sum_over_divisors(n, g);
            assert_eq!(recovered, (n as i128).pow(2), "inversion failed at {n}");
        }
    }

    #[test]
    fn valuation_fixtures() {
        assert_eq!(valuation(2, &rat(12, 1)).unwrap(), Valuation::Finite(2));
        assert_eq!(valuation(5, &rat(0, 1)).unwrap(), Valuation::Infinite);
        assert_eq!(valuation(3, &rat(10, 9)).unwrap(), Valuation::Finite(-2));
        assert_eq!(valuation(4, &rat(8, 1)), Err(Error::NotPrime(4)));
    }

    #[test]
    fn crt_fixtures() {
        assert_eq!(crt_solve(&[(1, 3), (2, 5)]).unwrap(), (7, 15));
        assert_eq!(crt_solve(&[]).unwrap(), (0, 1));
        assert_eq!(crt_solve(&[(5, 7)]).unwrap(), (5, 7));
        assert_eq!(
            crt_solve(&[(0, 4), (1, 6)]),
            Err(Error::NonCoprimeModuli(4, 6))
        );
    }

    #[test]
    fn odd_prime_power_recognition() {
        assert_eq!(odd_prime_power(3), Some((3, 1)));
        assert_eq!(odd_prime_power(9), Some((3, 2)));
        assert_eq!(odd_prime_power(27), Some((3, 3)));
        assert_eq!(odd_prime_power(169), Some((13, 2)));
        assert_eq!(odd_prime_power(81), None, "exponent 4 is out of range");
        assert_eq!(odd_prime_power(15), None);
        assert_eq!(odd_prime_power(2), None);
    }

    #[test]
    fn factored_arithmetic() {
        let twelve = factor(12);
        let ten = factor(10);
        assert_eq!(factored_mul(&twelve, &ten), vec![(2, 3), (3, 1), (5, 1)]);
        assert_eq!(factored_pow(&twelve, 3), vec![(2, 6), (3, 3)]);
        assert_eq!(factored_pow(&twelve, 0), vec![]);
        assert_eq!(factored_value(&factor(3072)).unwrap(), BigUint::from(3072u32));
    }

    #[test]
    fn decimal_approx_fixtures() {
        assert_eq!(decimal_approx(&factor(3072)), "3.07e3");
        assert_eq!(decimal_approx(&factor(1)), "1.00e0");
        assert_eq!(decimal_approx(&factor(999)), "9.99e2");
        // 7^200 * 660, a certificate-scale order.
        let big = factored_mul(&factored_pow(&factor(7), 200), &factor(660));
        assert_eq!(decimal_approx(&big), "6.90e171");
        // 5^48 * 168.
        let other = factored_mul(&factored_pow(&factor(5), 48), &factor(168));
        assert!(other.starts_with(&[(2, 3)][..]) || !other.is_empty());
        assert_eq!(decimal_approx(&other), "5.97e35");
    }

    #[test]
    fn lcm_helpers() {
        assert_eq!(checked_lcm(4, 6).unwrap(), 12);
        assert_eq!(lcm_all([3, 21, 630]).unwrap(), 630);
        assert_eq!(lcm_all(std::iter::empty()).unwrap(), 1);
        assert!(checked_lcm(u64::MAX, u64::MAX - 1).is_err());
    }

    proptest! {
        #[test]
        fn moebius_is_multiplicative(a in 1u64..500, b in 1u64..500) {
            prop_assume!(a.gcd(&b) == 1);
            prop_assert_eq!(moebius(a * b), moebius(a) * moebius(b));
        }

        #[test]
        fn totient_is_multiplicative(a in 1u64..500, b in 1u64..500) {
            prop_assume!(a.gcd(&b) == 1);
            prop_assert_eq!(totient(a * b), totient(a) * totient(b));
        }

        #[test]
        fn valuation_is_ultrametric(
            ell in prop::sample::select(vec![2u64, 3, 5, 7, 11]),
            an in -200i64..200, ad in 1i64..60,
            bn in -200i64..200, bd in 1i64..60,
        ) {
            let a = rat(an, ad);
            let b = rat(bn, bd);
            let va = valuation(ell, &a).unwrap();
            let vb = valuation(ell, &b).unwrap();
            let vsum = valuation(ell, &(&a + &b)).unwrap();
            let min = match (va, vb) {
                (Valuation::Infinite, x) | (x, Valuation::Infinite) => x,
                (Valuation::Finite(x), Valuation::Finite(y)) => Valuation::Finite(x.min(y)),
            };
            // v(a + b) >= min(v(a), v(b)).
            let ok = match (vsum, min) {
                (Valuation::Infinite, _) => true,
                (Valuation::Finite(_), Valuation::Infinite) => false,
                (Valuation::Finite(s), Valuation::Finite(m)) => s >= m,
            };
            prop_assert!(ok);
        }

        #[test]
        fn crt_solution_satisfies_congruences(
            r1 in 0u128..100, r2 in 0u128..100, r3 in 0u128..100,
        ) {
            let sys = [(r1 % 4, 4u128), (r2 % 9, 9u128), (r3 % 25, 25u128)];
            let (x, m) = crt_solve(&sys).unwrap();
            prop_assert_eq!(m, 900);
            for (r, md) in sys {
                prop_assert_eq!(x % md, r);
            }
        }
    }
}
