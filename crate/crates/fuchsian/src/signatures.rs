//! Signatures of finitely generated Fuchsian groups: parsing, normal forms,
//! and orbifold Euler characteristics.
//!
//! A signature `(g; p; m)` has genus `g`, `p` punctures, and a multiset `m`
//! of cone orders, each a finite integer `>= 2` or infinite. Two signatures
//! present isomorphic groups exactly when their normal forms coincide, where
//! the normal form drops order-1 cones, converts infinite cone orders into
//! punctures, trades genus for punctures (`(g; p; m)` with `p > 0` presents
//! the same group as `(0; 2g + p; m)`), and sorts the cone orders.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::{Error, Result};

/// A cone order as given on input, before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeOrder {
    Finite(u64),
    Infinite,
}

/// A signature in normal form. Construction normalizes, so equality of
/// values is isomorphism of the presented groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    genus: u64,
    punctures: u64,
    cones: Vec<u64>,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// The Euler characteristic `2 - sum (1 - 1/c_i)` of a cone-order multiset.
/// Entries equal to 1 contribute nothing.
pub fn chi_multiset(cones: &[u64]) -> BigRational {
    let mut chi = big(2);
    for &c in cones {
        assert!(c > 0, "cone orders are positive");
        chi -= big(1) - BigRational::new(BigInt::from(1), BigInt::from(c));
    }
    chi
}

impl Signature {
    /// Build a signature from raw data and put it in normal form.
    pub fn new(genus: u64, punctures: u64, cones: Vec<ConeOrder>) -> Result<Self> {
        let mut punctures = punctures;
        let mut finite = Vec::new();
        for c in cones {
            match c {
                ConeOrder::Infinite => punctures += 1,
                ConeOrder::Finite(0) => {
                    return Err(Error::Precondition("cone order must be at least 1".into()))
                }
                ConeOrder::Finite(1) => {}
                ConeOrder::Finite(m) => finite.push(m),
            }
        }
        let (genus, punctures) = if punctures > 0 {
            (0, 2 * genus + punctures)
        } else {
            (genus, 0)
        };
        finite.sort_unstable();
        Ok(Signature { genus, punctures, cones: finite })
    }

    /// Convenience constructor for finite cone orders only.
    pub fn from_parts(genus: u64, punctures: u64, cones: &[u64]) -> Result<Self> {
        Self::new(genus, punctures, cones.iter().map(|&c| ConeOrder::Finite(c)).collect())
    }

    pub fn genus(&self) -> u64 {
        self.genus
    }

    pub fn punctures(&self) -> u64 {
        self.punctures
    }

    /// Cone orders in ascending order; every entry is at least 2.
    pub fn cones(&self) -> &[u64] {
        &self.cones
    }

    pub fn is_punctured(&self) -> bool {
        self.punctures > 0
    }

    /// The orbifold Euler characteristic `2 - 2g - p - sum (1 - 1/m_i)`.
    pub fn chi(&self) -> BigRational {
        chi_multiset(&self.cones) - big(2 * self.genus as i64) - big(self.punctures as i64)
    }

    /// Whether the signature presents a Fuchsian group (`chi < 0`).
    pub fn is_fuchsian(&self) -> bool {
        self.chi() < big(0)
    }

    /// First Betti number of the group: `2g + p - 1` when punctured, `2g`
    /// otherwise. Equals the free rank of the abelianization.
    pub fn betti1(&self) -> u64 {
        if self.punctures > 0 {
            2 * self.genus + self.punctures - 1
        } else {
            2 * self.genus
        }
    }

    /// Least common multiple of the cone orders (1 when there are none).
    pub fn lcm_cones(&self) -> Result<u64> {
        crate::arith::lcm_all(self.cones.iter().copied())
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({};{};", self.genus, self.punctures)?;
        if self.cones.is_empty() {
            write!(f, "-")?;
        } else {
            for (i, c) in self.cones.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for Signature {
    type Err = Error;

    /// Parse `(<g>;<p>;<cones>)` where `<cones>` is a comma-separated list
    /// of positive integers or `inf`, or the single character `-` for the
    /// empty list.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let inner = trimmed
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("expected (g;p;cones), got {trimmed:?}")))?;
        let parts: Vec<&str> = inner.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "expected three ;-separated fields, got {} in {trimmed:?}",
                parts.len()
            )));
        }
        let genus: u64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad genus {:?}", parts[0].trim())))?;
        let punctures: u64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad puncture count {:?}", parts[1].trim())))?;
        let cone_field = parts[2].trim();
        let mut cones = Vec::new();
        if cone_field != "-" {
            if cone_field.is_empty() {
                return Err(Error::Parse(
                    "empty cone list must be written as '-'".into(),
                ));
            }
            for tok in cone_field.split(',') {
                let tok = tok.trim();
                if tok == "inf" {
                    cones.push(ConeOrder::Infinite);
                } else {
                    let m: u64 = tok
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad cone order {tok:?}")))?;
                    if m == 0 {
                        return Err(Error::Parse("cone order must be at least 1".into()));
                    }
                    cones.push(ConeOrder::Finite(m));
                }
            }
        }
        Signature::new(genus, punctures, cones)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(s: &str) -> Signature {
        s.parse().unwrap()
    }

    #[test]
    fn normalization_fixtures() {
        // Infinite cones become punctures, 1-cones vanish, genus trades
        // for punctures once any puncture exists.
        assert_eq!(sig("(1;1;3,1,inf)"), sig("(0;4;3)"));
        assert_eq!(sig("(2;1;5)"), sig("(0;5;5)"));
        assert_eq!(sig("(1;0;5,3)").to_string(), "(1;0;3,5)");
        assert_eq!(sig("(0;4;3)").to_string(), "(0;4;3)");
        assert_eq!(sig("(1;0;-)").to_string(), "(1;0;-)");
        assert_eq!(sig("(3;0;1,1)").to_string(), "(3;0;-)");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!("(0;0;)".parse::<Signature>(), Err(Error::Parse(_))));
        assert!(matches!("0;0;2".parse::<Signature>(), Err(Error::Parse(_))));
        assert!(matches!("(0;0;2;3)".parse::<Signature>(), Err(Error::Parse(_))));
        assert!(matches!("(0;0;0)".parse::<Signature>(), Err(Error::Parse(_))));
        assert!(matches!("(-1;0;2)".parse::<Signature>(), Err(Error::Parse(_))));
        assert!(matches!("(0;0;two)".parse::<Signature>(), Err(Error::Parse(_))));
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn chi_fixtures() {
        assert_eq!(sig("(0;0;4,3,7)").chi(), rat(-23, 84));
        assert_eq!(sig("(0;0;2,3,7)").chi(), rat(-1, 42));
        assert_eq!(sig("(0;0;15,42,63)").chi(), rat(-563, 630));
        assert_eq!(sig("(0;2;-)").chi(), rat(0, 1));
        assert!(!sig("(0;2;-)").is_fuchsian());
        assert!(sig("(0;3;-)").is_fuchsian());
        assert!(!sig("(0;0;2,3,6)").is_fuchsian(), "chi = 0 is Euclidean");
        assert_eq!(chi_multiset(&[4, 3, 7]), rat(-23, 84));
        assert_eq!(chi_multiset(&[1, 1]), rat(2, 1));
    }

    #[test]
    fn betti_fixtures() {
        assert_eq!(sig("(0;4;3)").betti1(), 3);
        assert_eq!(sig("(2;0;-)").betti1(), 4);
        assert_eq!(sig("(1;0;2,3)").betti1(), 2);
        assert_eq!(sig("(2;1;5)").betti1(), 4, "normalizes to (0;5;5)");
    }

    #[test]
    fn lcm_cones_works() {
        assert_eq!(sig("(0;0;15,42,63)").lcm_cones().unwrap(), 630);
        assert_eq!(sig("(1;0;-)").lcm_cones().unwrap(), 1);
    }

    // Euler characteristic of raw data, with infinite cones contributing a
    // full unit, for comparison against the normalized value.
    fn raw_chi(genus: u64, punctures: u64, cones: &[ConeOrder]) -> BigRational {
        let mut chi = rat(2 - 2 * genus as i64 - punctures as i64, 1);
        for c in cones {
            match c {
                ConeOrder::Infinite => chi -= rat(1, 1),
                ConeOrder::Finite(m) => chi -= rat(1, 1) - rat(1, *m as i64),
            }
        }
        chi
    }

    proptest! {
        #[test]
        fn normalization_preserves_chi(
            g in 0u64..4,
            p in 0u64..4,
            raw in prop::collection::vec(
                prop_oneof![
                    (1u64..20).prop_map(ConeOrder::Finite),
                    Just(ConeOrder::Infinite),
                ],
                0..5,
            ),
        ) {
            let s = Signature::new(g, p, raw.clone()).unwrap();
            prop_assert_eq!(s.chi(), raw_chi(g, p, &raw));
        }

        #[test]
        fn display_parse_round_trip(
            g in 0u64..4,
            p in 0u64..4,
            cones in prop::collection::vec(2u64..30, 0..5),
        ) {
            let s = Signature::from_parts(g, p, &cones).unwrap();
            let back: Signature = s.to_string().parse().unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn betti_matches_chi_shift(
            g in 0u64..4,
            p in 0u64..4,
            cones in prop::collection::vec(2u64..30, 0..5),
        ) {
            // For torsion-free signatures, b1 = 2 - chi when compact and
            // 1 - chi when punctured.
            let s = Signature::from_parts(g, p, &[]).unwrap();
            let _ = cones;
            let base = if s.is_punctured() { rat(1, 1) } else { rat(2, 1) };
            prop_assert_eq!(rat(s.betti1() as i64, 1), base - s.chi());
        }
    }
}
