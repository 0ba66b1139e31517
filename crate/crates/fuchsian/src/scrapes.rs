//! Scrapes of cone-order multisets: element-wise gcd operations that probe
//! a multiset at each divisor scale of its lcm, together with the closure
//! operation that repairs scraped entries into orders realizable inside
//! every `PSL(2,q)`, and the scan locating a scale at which two multisets
//! with identical abelian data become distinguishable.

use num_rational::BigRational;
use num_traits::Zero;

use crate::arith::{divisors, lcm_all};
use crate::signatures::chi_multiset;
use crate::{Error, Result};

/// The scrape `m_s`: element-wise `gcd(m_i, M/s)` relative to an ambient
/// modulus `M`, usually `lcm(m)`. Requires `s | M`.
pub fn scrape_with_modulus(m: &[u64], s: u64, modulus: u64) -> Result<Vec<u64>> {
    if s == 0 || !modulus.is_multiple_of(s) {
        return Err(Error::NotADivisor(s, modulus));
    }
    let q = modulus / s;
    Ok(m.iter().map(|&mi| num_integer::gcd(mi, q)).collect())
}

/// The scrape `m_s` relative to `lcm(m)`.
pub fn scrape(m: &[u64], s: u64) -> Result<Vec<u64>> {
    let modulus = lcm_all(m.iter().copied())?;
    scrape_with_modulus(m, s, modulus)
}

/// The coscrape `m^t = m_{M/t}`: element-wise `gcd(m_i, t)`. Requires
/// `t | lcm(m)`.
pub fn coscrape(m: &[u64], t: u64) -> Result<Vec<u64>> {
    let modulus = lcm_all(m.iter().copied())?;
    if t == 0 || modulus % t != 0 {
        return Err(Error::NotADivisor(t, modulus));
    }
    Ok(m.iter().map(|&mi| num_integer::gcd(mi, t)).collect())
}

/// The closure of a factor `c | m`, element-wise aligned with its parent.
/// Entries are bumped to small orders that exist in every `PSL(2,q)`:
/// a trivial entry becomes 2 or 3 when the parent allows it, and an entry
/// of 2 under a parent divisible by 6 becomes 3.
pub fn closure(c: &[u64], parent: &[u64]) -> Result<Vec<u64>> {
    if c.len() != parent.len() {
        return Err(Error::Precondition(format!(
            "factor length {} does not match parent length {}",
            c.len(),
            parent.len()
        )));
    }
    c.iter()
        .zip(parent)
        .map(|(&ci, &mi)| {
            if ci == 0 || mi % ci != 0 {
                return Err(Error::NotADivisor(ci, mi));
            }
            Ok(match ci {
                1 if mi % 3 == 0 => 3,
                1 if mi % 2 == 0 => 2,
                2 if mi % 2 == 0 && mi % 3 == 0 => 3,
                _ => ci,
            })
        })
        .collect()
}

/// Entries greater than 1, the part of a multiset that carries content.
pub fn stripped(c: &[u64]) -> Vec<u64> {
    c.iter().copied().filter(|&x| x > 1).collect()
}

/// A multiset is bad when, after stripping trivial entries, it has exactly
/// one element or exactly two distinct elements; such multisets admit no
/// surjection-compatible realization with those exact orders. Everything
/// else is good.
pub fn is_good(c: &[u64]) -> bool {
    let s = stripped(c);
    match s.len() {
        1 => false,
        2 => s[0] == s[1],
        _ => true,
    }
}

/// Smallest `s | M` at which the scrape closures of two multisets with a
/// common lcm `M` have different Euler characteristics. Returns
/// `(s, chi of left closure, chi of right closure)`.
pub fn find_distinguishing_scrape(
    m: &[u64],
    n: &[u64],
) -> Result<(u64, BigRational, BigRational)> {
    let mut sm = m.to_vec();
    let mut sn = n.to_vec();
    sm.sort_unstable();
    sn.sort_unstable();
    if sm == sn {
        return Err(Error::Precondition(
            "identical multisets cannot be separated by a scrape".into(),
        ));
    }
    let lm = lcm_all(m.iter().copied())?;
    let ln = lcm_all(n.iter().copied())?;
    if lm != ln {
        return Err(Error::Precondition(format!(
            "multisets must share an lcm, got {lm} and {ln}"
        )));
    }
    for s in divisors(lm) {
        let cm = closure(&scrape_with_modulus(m, s, lm)?, m)?;
        let cn = closure(&scrape_with_modulus(n, s, lm)?, n)?;
        let (xm, xn) = (chi_multiset(&cm), chi_multiset(&cn));
        if xm != xn {
            return Ok((s, xm, xn));
        }
    }
    Err(Error::Internal(
        "distinct multisets with a common lcm must be separated by some scrape".into(),
    ))
}

/// Outcome of the good-scrape scan: the scale, which acceptance clause
/// fired, which side is the winner (the side whose closure will be realized
/// smoothly), and the profiles on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodScrape {
    /// The accepted coscrape scale `t | lcm`.
    pub t: u64,
    /// 1: both closures good with distinct characteristics. 2: exactly one
    /// closure good, with characteristic at most the bad one's.
    pub clause: u8,
    pub winner_is_left: bool,
    /// Coscrape `winner^t`, aligned with the winner's cone multiset.
    pub winner_coscrape: Vec<u64>,
    /// Closure of the winner's coscrape; the profile to realize smoothly.
    pub winner_closure: Vec<u64>,
    pub loser_coscrape: Vec<u64>,
    pub loser_closure: Vec<u64>,
}

/// Scan `t | L` ascending, `L` the lcm of both multisets jointly, for the
/// first scale whose coscrape closures separate the two multisets in a
/// realizable way: either both closures are good and their Euler
/// characteristics differ, or exactly one is good with characteristic no
/// larger than the bad side's. In both cases the winning closure must have
/// negative characteristic, so it supports a hyperbolic realization.
///
/// Equal characteristics are not required: when they differ, the scale
/// `t = L` restores the full multisets and accepts, so this also covers
/// pairs that are separated by their characteristics alone.
pub fn find_good_distinguishing_scrape(m: &[u64], n: &[u64]) -> Result<GoodScrape> {
    if m.len() != n.len() {
        return Err(Error::Precondition(format!(
            "multiset lengths differ: {} vs {}; pad with trivial entries first",
            m.len(),
            n.len()
        )));
    }
    let mut sm = m.to_vec();
    let mut sn = n.to_vec();
    sm.sort_unstable();
    sn.sort_unstable();
    if sm == sn {
        return Err(Error::Precondition(
            "identical multisets cannot be separated by a scrape".into(),
        ));
    }
    let lm = lcm_all(m.iter().copied())?;
    let ln = lcm_all(n.iter().copied())?;
    let joint = crate::arith::checked_lcm(lm, ln)?;
    let zero = BigRational::zero();
    for t in divisors(joint) {
        let xm: Vec<u64> = m.iter().map(|&d| num_integer::gcd(d, t)).collect();
        let xn: Vec<u64> = n.iter().map(|&d| num_integer::gcd(d, t)).collect();
        let cm = closure(&xm, m)?;
        let cn = closure(&xn, n)?;
        let (gm, gn) = (is_good(&cm), is_good(&cn));
        let (km, kn) = (chi_multiset(&cm), chi_multiset(&cn));
        let accept = if gm && gn {
            if km == kn {
                None
            } else if km < kn {
                Some((1u8, true))
            } else {
                Some((1, false))
            }
        } else if gm && km <= kn {
            Some((2, true))
        } else if gn && kn <= km {
            Some((2, false))
        } else {
            None
        };
        if let Some((clause, winner_is_left)) = accept {
            let winner_chi = if winner_is_left { &km } else { &kn };
            if *winner_chi >= zero {
                continue;
            }
            let (wc, wcl, lc, lcl) = if winner_is_left {
                (xm, cm, xn, cn)
            } else {
                (xn, cn, xm, cm)
            };
            return Ok(GoodScrape {
                t,
                clause,
                winner_is_left,
                winner_coscrape: wc,
                winner_closure: wcl,
                loser_coscrape: lc,
                loser_closure: lcl,
            });
        }
    }
    Err(Error::Internal(
        "no usable scale found; distinct multisets with equal abelian data must admit one".into(),
    ))
}
