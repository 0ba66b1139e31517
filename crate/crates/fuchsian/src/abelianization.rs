//! Abelian invariants of Fuchsian group signatures.
//!
//! The abelianization of `(g; p; m)` is `Z^r x Z_{d_1} x ... x Z_{d_j}`
//! where the `d_i` form a divisor chain. The chain entries are the "middle
//! divisors" of the cone multiset: for each prime, sort the exponents it
//! carries across the multiset ascending and hand the i-th smallest to the
//! i-th chain entry. Punctured signatures keep all `k` entries; compact
//! ones lose the last (largest) entry to the relation among the elliptic
//! generators.

use crate::arith::factor;
use crate::signatures::{chi_multiset, Signature};
use crate::{Error, Result};

/// Middle divisors of a cone multiset: a divisor chain `d_1 | d_2 | ... |
/// d_k` with the same length and prime content as the input.
pub fn mids(cones: &[u64]) -> Vec<u64> {
    let k = cones.len();
    let mut out = vec![1u64; k];
    let mut primes: Vec<u64> = Vec::new();
    for &c in cones {
        assert!(c > 0, "cone orders are positive");
        for (p, _) in factor(c) {
            if !primes.contains(&p) {
                primes.push(p);
            }
        }
    }
    for p in primes {
        let mut vals: Vec<u32> = cones
            .iter()
            .map(|&c| {
                let mut v = 0u32;
                let mut c = c;
                while c % p == 0 {
                    c /= p;
                    v += 1;
                }
                v
            })
            .collect();
        vals.sort_unstable();
        for (slot, v) in out.iter_mut().zip(vals) {
            *slot *= p.pow(v);
        }
    }
    out
}

/// Invariants of a finitely generated abelian group: free rank plus a
/// torsion divisor chain. Trivial (`1`) chain entries are retained so the
/// chain length always matches the defining cone count, but they are
/// ignored by equality and hidden from display.
#[derive(Debug, Clone, Eq)]
pub struct AbelianInvariants {
    free_rank: u64,
    torsion_chain: Vec<u64>,
}

impl AbelianInvariants {
    pub fn new(free_rank: u64, torsion_chain: Vec<u64>) -> Self {
        debug_assert!(
            torsion_chain.windows(2).all(|w| w[1] % w[0] == 0),
            "torsion entries must divide successively"
        );
        AbelianInvariants { free_rank, torsion_chain }
    }

    pub fn free_rank(&self) -> u64 {
        self.free_rank
    }

    /// The full chain, including trivial entries.
    pub fn torsion_chain(&self) -> &[u64] {
        &self.torsion_chain
    }

    /// The chain with trivial entries stripped.
    pub fn torsion(&self) -> Vec<u64> {
        self.torsion_chain.iter().copied().filter(|&d| d > 1).collect()
    }

    /// Number of generators of `p^(j-1) A / p^j A` as a vector space over
    /// the field with `p` elements.
    fn layer_rank(&self, p: u64, j: u32) -> u64 {
        self.free_rank
            + self
                .torsion_chain
                .iter()
                .filter(|&&d| {
                    let mut v = 0u32;
                    let mut d = d;
                    while d % p == 0 {
                        d /= p;
                        v += 1;
                    }
                    v >= j
                })
                .count() as u64
    }

    /// Whether this group admits a surjection onto `other`. For finitely
    /// generated abelian groups this holds exactly when every `p`-layer of
    /// this group has at least the rank of the corresponding layer of
    /// `other`, including the depth-beyond-torsion layers, which compare
    /// the free ranks.
    pub fn surjects_onto(&self, other: &AbelianInvariants) -> bool {
        if self.free_rank < other.free_rank {
            return false;
        }
        let mut primes: Vec<u64> = Vec::new();
        for &d in self.torsion_chain.iter().chain(&other.torsion_chain) {
            for (p, _) in factor(d) {
                if !primes.contains(&p) {
                    primes.push(p);
                }
            }
        }
        for p in primes {
            let max_v = |chain: &[u64]| -> u32 {
                chain
                    .iter()
                    .map(|&d| {
                        let mut v = 0u32;
                        let mut d = d;
                        while d % p == 0 {
                            d /= p;
                            v += 1;
                        }
                        v
                    })
                    .max()
                    .unwrap_or(0)
            };
            let depth = max_v(&self.torsion_chain).max(max_v(&other.torsion_chain));
            for j in 1..=depth {
                if self.layer_rank(p, j) < other.layer_rank(p, j) {
                    return false;
                }
            }
        }
        true
    }
}

impl PartialEq for AbelianInvariants {
    fn eq(&self, other: &Self) -> bool {
        self.free_rank == other.free_rank && self.torsion() == other.torsion()
    }
}

impl std::fmt::Display for AbelianInvariants {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let torsion = self.torsion();
        if self.free_rank == 0 && torsion.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        if self.free_rank > 0 {
            write!(f, "Z^{}", self.free_rank)?;
            first = false;
        }
        for d in torsion {
            if !first {
                write!(f, " x ")?;
            }
            write!(f, "Z_{d}")?;
            first = false;
        }
        Ok(())
    }
}

/// Abelian invariants of the group presented by a signature.
pub fn abelianize(s: &Signature) -> AbelianInvariants {
    let chain = mids(s.cones());
    if s.is_punctured() {
        AbelianInvariants::new(s.betti1(), chain)
    } else {
        let mut chain = chain;
        chain.pop();
        AbelianInvariants::new(s.betti1(), chain)
    }
}

/// For compact signatures of a common genus whose abelianizations and Euler
/// characteristics agree, the cone multisets are forced to share both their
/// lcm and their product; returns the common lcm. Errors if the hypotheses
/// do not hold, and reports an internal contradiction if they hold but the
/// lcms still differ.
pub fn lcm_forced_equal(m: &[u64], n: &[u64]) -> Result<u64> {
    if m.len() != n.len() {
        return Err(Error::Precondition(format!(
            "multiset lengths differ: {} vs {}",
            m.len(),
            n.len()
        )));
    }
    let k = m.len();
    let (mm, nn) = (mids(m), mids(n));
    if k > 0 && mm[..k - 1] != nn[..k - 1] {
        return Err(Error::Precondition(
            "interior divisor chains differ, so the abelianizations differ".into(),
        ));
    }
    if chi_multiset(m) != chi_multiset(n) {
        return Err(Error::Precondition(
            "Euler characteristics differ, so the lcms are not forced equal".into(),
        ));
    }
    let lm = crate::arith::lcm_all(m.iter().copied())?;
    let ln = crate::arith::lcm_all(n.iter().copied())?;
    if lm != ln {
        return Err(Error::Internal(format!(
            "matching invariants should force equal lcms, got {lm} and {ln}"
        )));
    }
    Ok(lm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(s: &str) -> Signature {
        s.parse().unwrap()
    }

    #[test]
    fn mids_fixtures() {
        assert_eq!(mids(&[15, 42, 63]), vec![3, 21, 630]);
        assert_eq!(mids(&[21, 21, 90]), vec![3, 21, 630]);
        assert_eq!(mids(&[4, 3, 7]), vec![1, 1, 84]);
        assert_eq!(mids(&[2, 2]), vec![2, 2]);
        assert_eq!(mids(&[]), Vec::<u64>::new());
    }

    #[test]
    fn abelianize_fixtures() {
        let a = abelianize(&sig("(0;0;15,42,63)"));
        assert_eq!(a.free_rank(), 0);
        assert_eq!(a.torsion(), vec![3, 21]);

        let b = abelianize(&sig("(0;0;4,3,7)"));
        assert_eq!(b.free_rank(), 0);
        assert_eq!(b.torsion(), Vec::<u64>::new());
        assert_eq!(b.torsion_chain(), &[1, 1]);

        let c = abelianize(&sig("(3;0;-)"));
        assert_eq!(c.free_rank(), 6);
        assert_eq!(c.torsion(), Vec::<u64>::new());

        let d = abelianize(&sig("(0;3;2,2)"));
        assert_eq!(d.free_rank(), 2);
        assert_eq!(d.torsion(), vec![2, 2]);
    }

    #[test]
    fn abelianization_comparisons() {
        assert_eq!(
            abelianize(&sig("(0;0;15,42,63)")),
            abelianize(&sig("(0;0;21,21,90)"))
        );
        assert_eq!(
            abelianize(&sig("(0;0;4,3,7)")),
            abelianize(&sig("(0;0;2,3,7)"))
        );
        assert_ne!(
            abelianize(&sig("(0;0;2,3,7)")),
            abelianize(&sig("(0;0;2,2,2,3)"))
        );
    }

    #[test]
    fn compact_group_shares_abelianization_with_punctured_counterpart() {
        // (g;0;m) and (0;2g+1;interior mids of m) have the same invariants.
        for (g, m) in [(1u64, vec![15u64, 42, 63]), (2, vec![4, 3, 7]), (1, vec![6, 10, 15])] {
            let compact = Signature::from_parts(g, 0, &m).unwrap();
            let chain = mids(&m);
            let interior = &chain[..chain.len() - 1];
            let punctured = Signature::from_parts(0, 2 * g + 1, interior).unwrap();
            assert_eq!(abelianize(&compact), abelianize(&punctured), "failed for {m:?}");
        }
    }

    #[test]
    fn display_strips_trivial_entries() {
        let a = abelianize(&sig("(0;0;15,42,63)"));
        assert_eq!(a.to_string(), "Z_3 x Z_21");
        let b = abelianize(&sig("(0;4;3)"));
        assert_eq!(b.to_string(), "Z^3 x Z_3");
        let c = abelianize(&sig("(0;0;2,3,7)"));
        assert_eq!(c.to_string(), "0");
    }

    #[test]
    fn small_multisets_with_equal_invariants_and_chi_coincide() {
        // Exhaustive: for multisets of size <= 2 with entries in 2..=30,
        // matching abelianizations and Euler characteristics force equal
        // multisets, in both the compact and the punctured reading.
        let mut multisets: Vec<Vec<u64>> = vec![vec![]];
        for a in 2u64..=30 {
            multisets.push(vec![a]);
            for b in a..=30 {
                multisets.push(vec![a, b]);
            }
        }
        for c in &multisets {
            for d in &multisets {
                if c.len() != d.len() || c == d {
                    continue;
                }
                let compact_match = {
                    let sc = Signature::from_parts(1, 0, c).unwrap();
                    let sd = Signature::from_parts(1, 0, d).unwrap();
                    abelianize(&sc) == abelianize(&sd) && sc.chi() == sd.chi()
                };
                assert!(!compact_match, "compact pair {c:?} vs {d:?} not separated");
                let punctured_match = {
                    let sc = Signature::from_parts(0, 2, c).unwrap();
                    let sd = Signature::from_parts(0, 2, d).unwrap();
                    abelianize(&sc) == abelianize(&sd) && sc.chi() == sd.chi()
                };
                assert!(!punctured_match, "punctured pair {c:?} vs {d:?} not separated");
            }
        }
    }

    #[test]
    fn lcm_forced_equal_fixtures() {
        assert_eq!(lcm_forced_equal(&[15, 42, 63], &[21, 21, 90]).unwrap(), 630);
        // Equal interior mids but different chi: hypotheses fail.
        assert!(matches!(
            lcm_forced_equal(&[4, 6], &[2, 12]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            lcm_forced_equal(&[2, 3], &[2, 3, 5]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn surjection_order_fixtures() {
        let a = AbelianInvariants::new(1, vec![]);
        let b = AbelianInvariants::new(0, vec![4]);
        // Z surjects onto Z_4 but not conversely.
        assert!(a.surjects_onto(&b));
        assert!(!b.surjects_onto(&a));

        let c = AbelianInvariants::new(0, vec![2, 2]);
        let d = AbelianInvariants::new(0, vec![4]);
        // Z_2 x Z_2 and Z_4 are incomparable.
        assert!(!c.surjects_onto(&d));
        assert!(!d.surjects_onto(&c));

        let e = AbelianInvariants::new(2, vec![3]);
        let f = AbelianInvariants::new(2, vec![]);
        assert!(e.surjects_onto(&f));
        assert!(!f.surjects_onto(&e));
        assert!(e.surjects_onto(&e));
    }

    proptest! {
        #[test]
        fn mids_form_divisor_chain_with_same_product(
            cones in prop::collection::vec(2u64..60, 0..6),
        ) {
            let chain = mids(&cones);
            prop_assert_eq!(chain.len(), cones.len());
            for w in chain.windows(2) {
                prop_assert_eq!(w[1] % w[0], 0, "chain must divide successively");
            }
            let lhs: u128 = cones.iter().map(|&c| c as u128).product();
            let rhs: u128 = chain.iter().map(|&c| c as u128).product();
            prop_assert_eq!(lhs, rhs, "mids preserve the product");
            if let Some(&last) = chain.last() {
                let l = crate::arith::lcm_all(cones.iter().copied()).unwrap();
                prop_assert_eq!(last, l, "largest mid is the lcm");
            }
        }

        #[test]
        fn mids_are_permutation_invariant(
            mut cones in prop::collection::vec(2u64..60, 1..6),
            seed in 0u64..1000,
        ) {
            let original = mids(&cones);
            // Cheap deterministic shuffle.
            let len = cones.len();
            for i in 0..len {
                let j = ((seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % len;
                cones.swap(i, j);
            }
            prop_assert_eq!(mids(&cones), original);
        }

        #[test]
        fn surjection_order_is_antisymmetric_on_distinct(
            ra in 0u64..3, rb in 0u64..3,
            ta in prop::collection::vec(2u64..20, 0..3),
            tb in prop::collection::vec(2u64..20, 0..3),
        ) {
            // Turn arbitrary entries into a divisor chain by cumulative lcm.
            fn chain(v: &[u64]) -> Vec<u64> {
                let mut acc = 1u64;
                v.iter().map(|&x| { acc = crate::arith::checked_lcm(acc, x).unwrap(); acc }).collect()
            }
            let a = AbelianInvariants::new(ra, chain(&ta));
            let b = AbelianInvariants::new(rb, chain(&tb));
            if a.surjects_onto(&b) && b.surjects_onto(&a) {
                prop_assert_eq!(&a, &b, "mutual surjection must mean isomorphism");
            }
        }
    }
}
