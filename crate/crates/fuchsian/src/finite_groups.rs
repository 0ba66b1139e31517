//! Concrete finite groups and brute-force homomorphism enumeration.
//!
//! Four families cover every certificate this crate emits: cyclic groups,
//! dihedral groups, `PSL(2,q)` for odd prime powers `q = l^e` with `e <= 3`,
//! and the alternating group on four points, plus subgroups of `PSL(2,q)`
//! given by generators.  Elements are small copyable values, so groups up to
//! the materialization cap can be enumerated outright, and homomorphisms
//! from a signature's standard presentation can be counted or searched for
//! by exhaustion.  The enumerator is the verification oracle: everything the
//! distinguisher claims about small groups is replayed against it in tests.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::arith::odd_prime_power;
use crate::signatures::Signature;
use crate::{Error, Result};

/// Largest group order that [`ConcreteGroup::elements`] will materialize.
pub const MATERIALIZATION_LIMIT: u128 = 100_000;

/// Largest group order accepted for full homomorphism enumeration.
pub const ENUMERATION_ORDER_LIMIT: u128 = 2_000;

/// Largest number of generator assignments a full enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 100_000_000;

/// Arithmetic in the field with `q = l^e` elements, `q` odd, `e <= 3`.
///
/// Field elements are encoded as integers in `0..q`: the base-`l` digits
/// `d_0, d_1, d_2` of the encoding are the coefficients of the polynomial
/// `d_0 + d_1 t + d_2 t^2`.  Extensions are reduced modulo the monic
/// irreducible polynomial whose coefficient tuple, read from the leading
/// coefficient down, is lexicographically least; degrees 2 and 3 are
/// irreducible exactly when they have no root, which keeps the scan cheap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteField {
    ell: u64,
    degree: u32,
    q: u64,
    /// Coefficients `c_0 .. c_{e-1}` of the modulus `t^e + ... + c_0`.
    modulus_low: Vec<u64>,
}

impl FiniteField {
    pub fn new(q: u64) -> Result<Self> {
        let Some((ell, degree)) = odd_prime_power(q) else {
            return Err(Error::Precondition(format!(
                "{q} is not an odd prime power l^e with e <= 3"
            )));
        };
        let modulus_low = if degree == 1 {
            Vec::new()
        } else {
            Self::least_irreducible(ell, degree)
        };
        Ok(FiniteField {
            ell,
            degree,
            q,
            modulus_low,
        })
    }

    fn least_irreducible(ell: u64, degree: u32) -> Vec<u64> {
        // Ascending codes order the coefficient tuples lexicographically from
        // the leading coefficient down, because higher digits weigh more.
        for code in 0..ell.pow(degree) {
            let mut low = vec![0u64; degree as usize];
            let mut rest = code;
            for c in low.iter_mut() {
                *c = rest % ell;
                rest /= ell;
            }
            let has_root = (0..ell).any(|x| {
                let mut value = 1u64;
                for &c in low.iter().rev() {
                    value = (value * x + c) % ell;
                }
                value == 0
            });
            if !has_root {
                return low;
            }
        }
        unreachable!("irreducible polynomials of degree 2 and 3 exist over every prime field")
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn characteristic(&self) -> u64 {
        self.ell
    }

    fn digits(&self, a: u64) -> [u64; 3] {
        debug_assert!(a < self.q, "{a} is not an element of F_{}", self.q);
        let mut out = [0u64; 3];
        let mut rest = a;
        for d in out.iter_mut().take(self.degree as usize) {
            *d = rest % self.ell;
            rest /= self.ell;
        }
        out
    }

    fn encode(&self, digits: &[u64]) -> u64 {
        digits
            .iter()
            .take(self.degree as usize)
            .rev()
            .fold(0, |acc, &d| acc * self.ell + d)
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        let x = self.digits(a);
        let y = self.digits(b);
        let sum: Vec<u64> = x.iter().zip(&y).map(|(&u, &v)| (u + v) % self.ell).collect();
        self.encode(&sum)
    }

    pub fn neg(&self, a: u64) -> u64 {
        let x = self.digits(a);
        let neg: Vec<u64> = x.iter().map(|&u| (self.ell - u) % self.ell).collect();
        self.encode(&neg)
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        let e = self.degree as usize;
        let x = self.digits(a);
        let y = self.digits(b);
        let mut conv = [0u64; 5];
        for i in 0..e {
            for j in 0..e {
                conv[i + j] = (conv[i + j] + x[i] * y[j]) % self.ell;
            }
        }
        // Reduce t^i = t^(i-e) * -(low part of the modulus) from the top down.
        for i in (e..2 * e.max(1) - 1).rev() {
            let carry = conv[i];
            if carry == 0 {
                continue;
            }
            conv[i] = 0;
            for (j, &c) in self.modulus_low.iter().enumerate() {
                conv[i - e + j] = (conv[i - e + j] + carry * ((self.ell - c) % self.ell)) % self.ell;
            }
        }
        self.encode(&conv)
    }

    pub fn pow(&self, a: u64, mut k: u64) -> u64 {
        let mut base = a;
        let mut out = 1u64;
        while k > 0 {
            if k & 1 == 1 {
                out = self.mul(out, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        out
    }

    pub fn inv(&self, a: u64) -> u64 {
        assert!(a != 0, "zero has no inverse in F_{}", self.q);
        self.pow(a, self.q - 2)
    }
}

/// An element of one of the supported concrete groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupElement {
    Trivial,
    /// A residue modulo `n` in the cyclic group of order `n`.
    Cyclic(u64),
    /// `r^rotation * s^reflected` in `D_2n`, with `s r s = r^-1`.
    Dihedral { rotation: u64, reflected: bool },
    /// Canonical representative of `{A, -A}`, row major, field-encoded.
    Psl2([u64; 4]),
    /// An even permutation of `{0,1,2,3}`, listing the images in order.
    Perm4([u8; 4]),
}

/// What a [`ConcreteGroup`] is, without any cached state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Descriptor {
    Trivial,
    /// Cyclic of order `n`.
    Cyclic { n: u64 },
    /// Dihedral of order `2n`.
    Dihedral { n: u64 },
    /// `PSL(2,q)` for an odd prime power `q = l^e`, `e <= 3`.
    Psl2 { q: u64 },
    /// The subgroup of `PSL(2,q)` generated by explicit elements.
    Psl2Subgroup {
        q: u64,
        generators: Vec<GroupElement>,
    },
    /// The alternating group on four points.
    Alt4,
}

/// A finite group the crate can compute in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteGroup {
    descriptor: Descriptor,
    field: Option<FiniteField>,
}

impl ConcreteGroup {
    pub fn trivial() -> Self {
        ConcreteGroup {
            descriptor: Descriptor::Trivial,
            field: None,
        }
    }

    pub fn cyclic(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("cyclic group order must be positive".into()));
        }
        Ok(ConcreteGroup {
            descriptor: Descriptor::Cyclic { n },
            field: None,
        })
    }

    /// The dihedral group of the given order `2n`.
    pub fn dihedral(order: u64) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::Precondition(format!(
                "dihedral group order must be even and positive, got {order}"
            )));
        }
        Ok(ConcreteGroup {
            descriptor: Descriptor::Dihedral { n: order / 2 },
            field: None,
        })
    }

    pub fn psl2(q: u64) -> Result<Self> {
        let field = FiniteField::new(q)?;
        Ok(ConcreteGroup {
            descriptor: Descriptor::Psl2 { q },
            field: Some(field),
        })
    }

    /// The subgroup of `PSL(2,q)` generated by `generators`.  The generators
    /// are canonicalized and must be matrices over the right field with
    /// determinant one.
    pub fn psl2_subgroup(q: u64, generators: Vec<GroupElement>) -> Result<Self> {
        let field = FiniteField::new(q)?;
        let mut canonical = Vec::with_capacity(generators.len());
        for g in generators {
            let GroupElement::Psl2(m) = g else {
                return Err(Error::Precondition(format!(
                    "subgroup generators must be psl2 matrices, got {g:?}"
                )));
            };
            if m.iter().any(|&entry| entry >= q) {
                return Err(Error::Precondition(format!(
                    "matrix entry out of range for F_{q}"
                )));
            }
            let det = field.sub(field.mul(m[0], m[3]), field.mul(m[1], m[2]));
            if det != 1 {
                return Err(Error::Precondition(format!(
                    "subgroup generator has determinant {det}, expected 1"
                )));
            }
            canonical.push(GroupElement::Psl2(canonicalize_psl2(&field, m)));
        }
        Ok(ConcreteGroup {
            descriptor: Descriptor::Psl2Subgroup {
                q,
                generators: canonical,
            },
            field: Some(field),
        })
    }

    pub fn alt4() -> Self {
        ConcreteGroup {
            descriptor: Descriptor::Alt4,
            field: None,
        }
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn field(&self) -> Option<&FiniteField> {
        self.field.as_ref()
    }

    /// Parses `trivial`, `cyclic:<n>`, `dihedral:<order>`, `psl2:<q>`, or
    /// `alt4`.
    pub fn parse(descriptor: &str) -> Result<Self> {
        let bad = || Error::Parse(format!(
            "unknown group descriptor {descriptor:?}; expected trivial, cyclic:<n>, dihedral:<2n>, psl2:<q>, or alt4"
        ));
        match descriptor {
            "trivial" => return Ok(Self::trivial()),
            "alt4" => return Ok(Self::alt4()),
            _ => {}
        }
        let (kind, value) = descriptor.split_once(':').ok_or_else(bad)?;
        let value: u64 = value.trim().parse().map_err(|_| bad())?;
        match kind {
            "cyclic" => Self::cyclic(value),
            "dihedral" => Self::dihedral(value),
            "psl2" => Self::psl2(value),
            _ => Err(bad()),
        }
    }

    pub fn order(&self) -> Result<u128> {
        match &self.descriptor {
            Descriptor::Trivial => Ok(1),
            Descriptor::Cyclic { n } => Ok(*n as u128),
            Descriptor::Dihedral { n } => Ok(2 * *n as u128),
            Descriptor::Psl2 { q } => Ok(psl2_order(*q)),
            Descriptor::Psl2Subgroup { q, generators } => {
                let ambient = ConcreteGroup::psl2(*q)?;
                Ok(generated_subgroup(&ambient, generators)?.len() as u128)
            }
            Descriptor::Alt4 => Ok(12),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match &self.descriptor {
            Descriptor::Trivial => GroupElement::Trivial,
            Descriptor::Cyclic { .. } => GroupElement::Cyclic(0),
            Descriptor::Dihedral { .. } => GroupElement::Dihedral {
                rotation: 0,
                reflected: false,
            },
            Descriptor::Psl2 { .. } | Descriptor::Psl2Subgroup { .. } => {
                GroupElement::Psl2([1, 0, 0, 1])
            }
            Descriptor::Alt4 => GroupElement::Perm4([0, 1, 2, 3]),
        }
    }

    pub fn multiply(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        match (&self.descriptor, a, b) {
            (Descriptor::Trivial, GroupElement::Trivial, GroupElement::Trivial) => {
                GroupElement::Trivial
            }
            (Descriptor::Cyclic { n }, GroupElement::Cyclic(x), GroupElement::Cyclic(y)) => {
                GroupElement::Cyclic((x + y) % n)
            }
            (
                Descriptor::Dihedral { n },
                GroupElement::Dihedral {
                    rotation: i,
                    reflected: e,
                },
                GroupElement::Dihedral {
                    rotation: j,
                    reflected: d,
                },
            ) => {
                // s r^j = r^-j s, so r^i s^e r^j s^d = r^(i +- j) s^(e xor d).
                let rotation = if e { (i + n - j % n) % n } else { (i + j) % n };
                GroupElement::Dihedral {
                    rotation,
                    reflected: e != d,
                }
            }
            (
                Descriptor::Psl2 { .. } | Descriptor::Psl2Subgroup { .. },
                GroupElement::Psl2(x),
                GroupElement::Psl2(y),
            ) => {
                let f = self.field.as_ref().expect("psl2 groups carry their field");
                let product = [
                    f.add(f.mul(x[0], y[0]), f.mul(x[1], y[2])),
                    f.add(f.mul(x[0], y[1]), f.mul(x[1], y[3])),
                    f.add(f.mul(x[2], y[0]), f.mul(x[3], y[2])),
                    f.add(f.mul(x[2], y[1]), f.mul(x[3], y[3])),
                ];
                GroupElement::Psl2(canonicalize_psl2(f, product))
            }
            (Descriptor::Alt4, GroupElement::Perm4(x), GroupElement::Perm4(y)) => {
                let mut out = [0u8; 4];
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = y[x[i] as usize];
                }
                GroupElement::Perm4(out)
            }
            (_, a, b) => panic!("elements {a:?} and {b:?} do not belong to {self}"),
        }
    }

    pub fn inverse(&self, a: GroupElement) -> GroupElement {
        match (&self.descriptor, a) {
            (Descriptor::Trivial, GroupElement::Trivial) => GroupElement::Trivial,
            (Descriptor::Cyclic { n }, GroupElement::Cyclic(x)) => {
                GroupElement::Cyclic((n - x) % n)
            }
            (Descriptor::Dihedral { n }, GroupElement::Dihedral { rotation, reflected }) => {
                if reflected {
                    GroupElement::Dihedral {
                        rotation,
                        reflected,
                    }
                } else {
                    GroupElement::Dihedral {
                        rotation: (n - rotation) % n,
                        reflected,
                    }
                }
            }
            (
                Descriptor::Psl2 { .. } | Descriptor::Psl2Subgroup { .. },
                GroupElement::Psl2([a, b, c, d]),
            ) => {
                let f = self.field.as_ref().expect("psl2 groups carry their field");
                GroupElement::Psl2(canonicalize_psl2(f, [d, f.neg(b), f.neg(c), a]))
            }
            (Descriptor::Alt4, GroupElement::Perm4(x)) => {
                let mut out = [0u8; 4];
                for (i, &image) in x.iter().enumerate() {
                    out[image as usize] = i as u8;
                }
                GroupElement::Perm4(out)
            }
            (_, a) => panic!("element {a:?} does not belong to {self}"),
        }
    }

    /// The least `n >= 1` with `g^n` the identity.
    pub fn element_order(&self, g: GroupElement) -> u64 {
        let identity = self.identity();
        let mut power = g;
        let mut order = 1;
        while power != identity {
            power = self.multiply(power, g);
            order += 1;
        }
        order
    }

    /// All elements, in a deterministic order.  Fails with a capacity error
    /// beyond [`MATERIALIZATION_LIMIT`].
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        let order = self.order()?;
        if order > MATERIALIZATION_LIMIT {
            return Err(Error::GroupTooLarge {
                order,
                limit: MATERIALIZATION_LIMIT,
            });
        }
        let out = match &self.descriptor {
            Descriptor::Trivial => vec![GroupElement::Trivial],
            Descriptor::Cyclic { n } => (0..*n).map(GroupElement::Cyclic).collect(),
            Descriptor::Dihedral { n } => (0..*n)
                .flat_map(|rotation| {
                    [false, true].map(|reflected| GroupElement::Dihedral { rotation, reflected })
                })
                .collect(),
            Descriptor::Psl2 { q } => {
                let f = self.field.as_ref().expect("psl2 groups carry their field");
                let mut seen = BTreeSet::new();
                // a != 0: b, c free and d = (1 + bc)/a; a = 0: c = -1/b, d free.
                for a in 1..*q {
                    let inv_a = f.inv(a);
                    for b in 0..*q {
                        for c in 0..*q {
                            let d = f.mul(f.add(1, f.mul(b, c)), inv_a);
                            seen.insert(canonicalize_psl2(f, [a, b, c, d]));
                        }
                    }
                }
                for b in 1..*q {
                    let c = f.neg(f.inv(b));
                    for d in 0..*q {
                        seen.insert(canonicalize_psl2(f, [0, b, c, d]));
                    }
                }
                seen.into_iter().map(GroupElement::Psl2).collect()
            }
            Descriptor::Psl2Subgroup { q, generators } => {
                let ambient = ConcreteGroup::psl2(*q)?;
                generated_subgroup(&ambient, generators)?
            }
            Descriptor::Alt4 => {
                let mut out = Vec::with_capacity(12);
                let mut images = [0u8; 4];
                permute_even(&mut images, 0, &mut [false; 4], &mut out);
                out.sort();
                out
            }
        };
        debug_assert_eq!(out.len() as u128, order);
        Ok(out)
    }
}

fn permute_even(
    images: &mut [u8; 4],
    depth: usize,
    used: &mut [bool; 4],
    out: &mut Vec<GroupElement>,
) {
    if depth == 4 {
        let mut inversions = 0;
        for i in 0..4 {
            for j in i + 1..4 {
                if images[i] > images[j] {
                    inversions += 1;
                }
            }
        }
        if inversions % 2 == 0 {
            out.push(GroupElement::Perm4(*images));
        }
        return;
    }
    for value in 0..4u8 {
        if !used[value as usize] {
            used[value as usize] = true;
            images[depth] = value;
            permute_even(images, depth + 1, used, out);
            used[value as usize] = false;
        }
    }
}

impl fmt::Display for ConcreteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.descriptor {
            Descriptor::Trivial => write!(f, "trivial"),
            Descriptor::Cyclic { n } => write!(f, "cyclic:{n}"),
            Descriptor::Dihedral { n } => write!(f, "dihedral:{}", 2 * n),
            Descriptor::Psl2 { q } => write!(f, "psl2:{q}"),
            Descriptor::Psl2Subgroup { q, generators } => {
                write!(f, "subgroup of psl2:{q} on {} generators", generators.len())
            }
            Descriptor::Alt4 => write!(f, "alt4"),
        }
    }
}

/// The canonical representative of `{A, -A}`: the lexicographically smaller
/// of the two encoded entry arrays.  Well defined because the field has odd
/// characteristic, and idempotent because negation is an involution.
fn canonicalize_psl2(field: &FiniteField, m: [u64; 4]) -> [u64; 4] {
    let negated = [
        field.neg(m[0]),
        field.neg(m[1]),
        field.neg(m[2]),
        field.neg(m[3]),
    ];
    m.min(negated)
}

/// `|PSL(2,q)| = q(q^2 - 1)/2` for odd `q`.
pub fn psl2_order(q: u64) -> u128 {
    let q = q as u128;
    q * (q * q - 1) / 2
}

/// The set of element orders of `PSL(2,q)`: 1 and the characteristic, plus
/// all divisors of `(q - 1)/2` and of `(q + 1)/2`.
pub fn psl2_element_orders(q: u64) -> Result<BTreeSet<u64>> {
    let Some((ell, _)) = odd_prime_power(q) else {
        return Err(Error::Precondition(format!(
            "{q} is not an odd prime power l^e with e <= 3"
        )));
    };
    let mut orders = BTreeSet::from([1, ell]);
    orders.extend(crate::arith::divisors((q - 1) / 2));
    orders.extend(crate::arith::divisors(q.div_ceil(2)));
    Ok(orders)
}

/// The subgroup generated by `generators`, as a sorted element list.
///
/// The ambient group must be materializable.  Exceeding the ambient order
/// during closure indicates broken group arithmetic and is reported as an
/// internal error.
pub fn generated_subgroup(
    group: &ConcreteGroup,
    generators: &[GroupElement],
) -> Result<Vec<GroupElement>> {
    let ambient = group.order()?;
    if ambient > MATERIALIZATION_LIMIT {
        return Err(Error::GroupTooLarge {
            order: ambient,
            limit: MATERIALIZATION_LIMIT,
        });
    }
    let mut seen = HashSet::from([group.identity()]);
    let mut queue = VecDeque::from([group.identity()]);
    while let Some(current) = queue.pop_front() {
        for &g in generators {
            let next = group.multiply(current, g);
            if seen.insert(next) {
                if seen.len() as u128 > ambient {
                    return Err(Error::Internal(format!(
                        "closure of {} generators exceeded the ambient order {ambient}",
                        generators.len()
                    )));
                }
                queue.push_back(next);
            }
        }
    }
    let mut out: Vec<GroupElement> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Whether `generators` generate the whole group.  Stops early once the
/// closure passes half the group order, since no proper subgroup can.
pub fn generates(group: &ConcreteGroup, generators: &[GroupElement]) -> Result<bool> {
    let ambient = group.order()?;
    if ambient > MATERIALIZATION_LIMIT {
        return Err(Error::GroupTooLarge {
            order: ambient,
            limit: MATERIALIZATION_LIMIT,
        });
    }
    let mut seen = HashSet::from([group.identity()]);
    let mut queue = VecDeque::from([group.identity()]);
    while let Some(current) = queue.pop_front() {
        for &g in generators {
            let next = group.multiply(current, g);
            if seen.insert(next) {
                if 2 * seen.len() as u128 > ambient {
                    return Ok(true);
                }
                queue.push_back(next);
            }
        }
    }
    Ok(seen.len() as u128 == ambient)
}

/// Images of the standard generators under a homomorphism, in presentation
/// order: genus pairs `(alpha_i, beta_i)`, then elliptic `x_i`, then
/// parabolic `y_t`.  The defining relation is
/// `[a_1,b_1] ... [a_g,b_g] x_1 ... x_k y_1 ... y_p = 1` with the commutator
/// convention `[a,b] = a b a^-1 b^-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorImages {
    pub handles: Vec<(GroupElement, GroupElement)>,
    pub elliptic: Vec<GroupElement>,
    pub parabolic: Vec<GroupElement>,
}

impl GeneratorImages {
    /// Every image in presentation order.
    pub fn all(&self) -> Vec<GroupElement> {
        let mut out = Vec::new();
        for &(a, b) in &self.handles {
            out.push(a);
            out.push(b);
        }
        out.extend(self.elliptic.iter().copied());
        out.extend(self.parabolic.iter().copied());
        out
    }

    /// Evaluates the defining relation at these images.
    pub fn relation_value(&self, group: &ConcreteGroup) -> GroupElement {
        let mut value = group.identity();
        for &(a, b) in &self.handles {
            let commutator = group.multiply(
                group.multiply(a, b),
                group.multiply(group.inverse(a), group.inverse(b)),
            );
            value = group.multiply(value, commutator);
        }
        for &x in &self.elliptic {
            value = group.multiply(value, x);
        }
        for &y in &self.parabolic {
            value = group.multiply(value, y);
        }
        value
    }
}

/// Where the generator determined by the relation sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Determined {
    /// `p > 0`: the last parabolic image, unconstrained.
    LastParabolic,
    /// `p = 0`, `k > 0`: the last elliptic image; its order is constrained.
    LastElliptic,
    /// No generators at all: the relation must already hold.
    None,
}

struct SlotPlan {
    genus: usize,
    elliptic_orders: Vec<u64>,
    parabolics: usize,
    determined: Determined,
    /// Exact target orders for the elliptic images, when a profile is given.
    profile: Option<Vec<u64>>,
}

impl SlotPlan {
    fn new(sig: &Signature, profile: Option<&[u64]>) -> Result<Self> {
        let cones = sig.cones().to_vec();
        if let Some(profile) = profile {
            if profile.len() != cones.len() {
                return Err(Error::Precondition(format!(
                    "order profile has length {} but the signature has {} cone points",
                    profile.len(),
                    cones.len()
                )));
            }
            for (&c, &m) in profile.iter().zip(&cones) {
                if c == 0 || m % c != 0 {
                    return Err(Error::Precondition(format!(
                        "profile entry {c} does not divide the cone order {m}"
                    )));
                }
            }
        }
        let determined = if sig.punctures() > 0 {
            Determined::LastParabolic
        } else if !cones.is_empty() {
            Determined::LastElliptic
        } else {
            Determined::None
        };
        Ok(SlotPlan {
            genus: sig.genus() as usize,
            elliptic_orders: cones,
            parabolics: sig.punctures() as usize,
            determined,
            profile: profile.map(<[u64]>::to_vec),
        })
    }

    fn free_elliptic_count(&self) -> usize {
        match self.determined {
            Determined::LastElliptic => self.elliptic_orders.len() - 1,
            _ => self.elliptic_orders.len(),
        }
    }

    fn free_parabolic_count(&self) -> usize {
        match self.determined {
            Determined::LastParabolic => self.parabolics - 1,
            _ => self.parabolics,
        }
    }

    /// Whether `order` is acceptable for the elliptic image at `index`.
    fn elliptic_order_ok(&self, index: usize, order: u64) -> bool {
        match &self.profile {
            Some(profile) => order == profile[index],
            None => self.elliptic_orders[index].is_multiple_of(order),
        }
    }
}

struct Enumerator<'a> {
    group: &'a ConcreteGroup,
    elements: Vec<GroupElement>,
    orders: HashMap<GroupElement, u64>,
}

impl<'a> Enumerator<'a> {
    fn new(group: &'a ConcreteGroup) -> Result<Self> {
        let elements = group.elements()?;
        let orders = elements
            .iter()
            .map(|&g| (g, group.element_order(g)))
            .collect();
        Ok(Enumerator {
            group,
            elements,
            orders,
        })
    }

    fn elliptic_candidates(&self, plan: &SlotPlan, index: usize) -> Vec<GroupElement> {
        self.elements
            .iter()
            .copied()
            .filter(|g| plan.elliptic_order_ok(index, self.orders[g]))
            .collect()
    }

    /// Representatives of the conjugacy classes, one per class.
    fn class_representatives(&self) -> Vec<GroupElement> {
        let mut seen: HashSet<GroupElement> = HashSet::new();
        let mut reps = Vec::new();
        for &g in &self.elements {
            if seen.contains(&g) {
                continue;
            }
            reps.push(g);
            for &h in &self.elements {
                let conjugate = self
                    .group
                    .multiply(self.group.multiply(h, g), self.group.inverse(h));
                seen.insert(conjugate);
            }
        }
        reps
    }
}

fn assemble(
    plan: &SlotPlan,
    choices: &[GroupElement],
    determined: Option<GroupElement>,
) -> GeneratorImages {
    let mut iter = choices.iter().copied();
    let handles = (0..plan.genus)
        .map(|_| {
            let a = iter.next().expect("handle image present");
            let b = iter.next().expect("handle image present");
            (a, b)
        })
        .collect();
    let mut elliptic: Vec<GroupElement> = (0..plan.free_elliptic_count())
        .map(|_| iter.next().expect("elliptic image present"))
        .collect();
    let mut parabolic: Vec<GroupElement> = (0..plan.free_parabolic_count())
        .map(|_| iter.next().expect("parabolic image present"))
        .collect();
    match plan.determined {
        Determined::LastElliptic => elliptic.push(determined.expect("determined image present")),
        Determined::LastParabolic => parabolic.push(determined.expect("determined image present")),
        Determined::None => {}
    }
    GeneratorImages {
        handles,
        elliptic,
        parabolic,
    }
}

/// Counts homomorphisms from the standard presentation of `sig` to `group`
/// by full enumeration, optionally keeping only surjections, and optionally
/// keeping only maps whose elliptic images have exactly the orders in
/// `profile` (otherwise any orders dividing the cone orders are allowed).
pub fn count_homomorphisms(
    sig: &Signature,
    group: &ConcreteGroup,
    profile: Option<&[u64]>,
    require_surjective: bool,
) -> Result<u128> {
    let order = group.order()?;
    if order > ENUMERATION_ORDER_LIMIT {
        return Err(Error::GroupTooLarge {
            order,
            limit: ENUMERATION_ORDER_LIMIT,
        });
    }
    let plan = SlotPlan::new(sig, profile)?;
    let enumerator = Enumerator::new(group)?;
    let mut slots: Vec<Vec<GroupElement>> = Vec::new();
    for _ in 0..2 * plan.genus {
        slots.push(enumerator.elements.clone());
    }
    for index in 0..plan.free_elliptic_count() {
        slots.push(enumerator.elliptic_candidates(&plan, index));
    }
    for _ in 0..plan.free_parabolic_count() {
        slots.push(enumerator.elements.clone());
    }
    let assignments: u128 = slots.iter().map(|s| s.len() as u128).product();
    if assignments > ENUMERATION_BUDGET {
        return Err(Error::EnumerationTooLarge {
            assignments,
            limit: ENUMERATION_BUDGET,
        });
    }

    let mut count = 0u128;
    let mut choices: Vec<GroupElement> = Vec::with_capacity(slots.len());
    visit(
        &enumerator,
        &plan,
        &slots,
        &mut choices,
        &mut |images: &GeneratorImages| -> Result<bool> {
            if !require_surjective || generates(group, &images.all())? {
                count += 1;
            }
            Ok(false)
        },
    )?;
    Ok(count)
}

/// Depth-first enumeration over `slots`; calls `leaf` with each valid set of
/// generator images, stopping early if `leaf` returns `true`.
fn visit(
    enumerator: &Enumerator<'_>,
    plan: &SlotPlan,
    slots: &[Vec<GroupElement>],
    choices: &mut Vec<GroupElement>,
    leaf: &mut dyn FnMut(&GeneratorImages) -> Result<bool>,
) -> Result<bool> {
    if choices.len() == slots.len() {
        let images = match plan.determined {
            Determined::None => {
                let images = assemble(plan, choices, None);
                if images.relation_value(enumerator.group) != enumerator.group.identity() {
                    return Ok(false);
                }
                images
            }
            Determined::LastParabolic | Determined::LastElliptic => {
                let prefix = assemble(plan, choices, Some(enumerator.group.identity()))
                    .relation_value(enumerator.group);
                let value = enumerator.group.inverse(prefix);
                if plan.determined == Determined::LastElliptic {
                    let index = plan.elliptic_orders.len() - 1;
                    let order = enumerator.orders[&value];
                    if !plan.elliptic_order_ok(index, order) {
                        return Ok(false);
                    }
                }
                assemble(plan, choices, Some(value))
            }
        };
        debug_assert_eq!(
            images.relation_value(enumerator.group),
            enumerator.group.identity()
        );
        return leaf(&images);
    }
    let depth = choices.len();
    for &candidate in &slots[depth] {
        choices.push(candidate);
        let done = visit(enumerator, plan, slots, choices, leaf)?;
        choices.pop();
        if done {
            return Ok(true);
        }
    }
    Ok(false)
}

/// A reusable context for repeated searches against one group: materialized
/// elements, element orders, and conjugacy class representatives.
pub struct EpiSearchContext {
    group: ConcreteGroup,
    elements: Vec<GroupElement>,
    orders: HashMap<GroupElement, u64>,
    class_representatives: Vec<GroupElement>,
}

impl EpiSearchContext {
    pub fn new(group: &ConcreteGroup) -> Result<Self> {
        let enumerator = Enumerator::new(group)?;
        let class_representatives = enumerator.class_representatives();
        Ok(EpiSearchContext {
            group: group.clone(),
            elements: enumerator.elements,
            orders: enumerator.orders,
            class_representatives,
        })
    }

    pub fn group(&self) -> &ConcreteGroup {
        &self.group
    }

    /// The distinct element orders available in the group.
    pub fn available_orders(&self) -> BTreeSet<u64> {
        self.orders.values().copied().collect()
    }

    fn search(
        &self,
        sig: &Signature,
        profile: Option<&[u64]>,
        require_surjective: bool,
    ) -> Result<Option<GeneratorImages>> {
        let plan = SlotPlan::new(sig, profile)?;
        let enumerator = Enumerator {
            group: &self.group,
            elements: self.elements.clone(),
            orders: self.orders.clone(),
        };
        let mut slots: Vec<Vec<GroupElement>> = Vec::new();
        for _ in 0..2 * plan.genus {
            slots.push(enumerator.elements.clone());
        }
        for index in 0..plan.free_elliptic_count() {
            slots.push(enumerator.elliptic_candidates(&plan, index));
        }
        for _ in 0..plan.free_parabolic_count() {
            slots.push(enumerator.elements.clone());
        }
        // The relation and surjectivity are invariant under conjugating every
        // image at once, so the first free slot only needs one representative
        // per conjugacy class.
        if let Some(first) = slots.first_mut() {
            let keep: HashSet<GroupElement> = self.class_representatives.iter().copied().collect();
            first.retain(|g| keep.contains(g));
        }
        let mut found = None;
        let mut choices: Vec<GroupElement> = Vec::with_capacity(slots.len());
        visit(
            &enumerator,
            &plan,
            &slots,
            &mut choices,
            &mut |images: &GeneratorImages| -> Result<bool> {
                if require_surjective && !generates(&self.group, &images.all())? {
                    return Ok(false);
                }
                found = Some(images.clone());
                Ok(true)
            },
        )?;
        Ok(found)
    }

    /// Searches for a surjection whose elliptic images have exactly the
    /// orders in `profile` (any dividing orders if absent).
    pub fn find_epimorphism(
        &self,
        sig: &Signature,
        profile: Option<&[u64]>,
    ) -> Result<Option<GeneratorImages>> {
        self.search(sig, profile, true)
    }

    /// Searches for a homomorphism, not necessarily surjective, whose
    /// elliptic images have exactly the orders in `profile`.
    pub fn find_smooth_homomorphism(
        &self,
        sig: &Signature,
        profile: &[u64],
    ) -> Result<Option<GeneratorImages>> {
        self.search(sig, Some(profile), false)
    }
}

/// One-shot convenience wrapper around [`EpiSearchContext::find_epimorphism`].
pub fn find_epimorphism(
    sig: &Signature,
    group: &ConcreteGroup,
    profile: Option<&[u64]>,
) -> Result<Option<GeneratorImages>> {
    EpiSearchContext::new(group)?.find_epimorphism(sig, profile)
}
