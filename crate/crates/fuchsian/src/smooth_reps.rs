//! Smooth quotients: divisibility criteria, explicit dihedral witnesses,
//! the prime search for suitable `PSL(2,q)` targets, maximally smooth
//! profiles, and kernel signatures.
//!
//! A homomorphism from a signature group is smooth on a cone generator when
//! the image order equals the cone order, and `c`-smooth when the elliptic
//! image orders are exactly a prescribed componentwise factor `c` of the
//! cone orders.  This module decides when such maps into `PSL(2,q)` exist,
//! builds explicit dihedral witnesses for genus-one sources, finds prime
//! powers `q` whose element orders force a prescribed profile to be the
//! best possible, and computes the signature of the kernel of a finite
//! quotient.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::arith::{lcm_all, odd_prime_power};
use crate::finite_groups::{
    ConcreteGroup, Descriptor, EpiSearchContext, GeneratorImages, GroupElement,
    ENUMERATION_ORDER_LIMIT,
};
use crate::signatures::Signature;
use crate::{Error, Result};

/// Largest number of punctures plus cone points a kernel signature may have.
pub const KERNEL_SIZE_LIMIT: u128 = 1_000_000;

/// A homomorphism from a signature group to a concrete finite group with
/// prescribed elliptic and parabolic image orders.
///
/// When a witness is present its images satisfy the defining relation, have
/// exactly the recorded orders on the elliptic generators, and generate the
/// target.
#[derive(Clone, Debug)]
pub struct SmoothRep {
    pub source: Signature,
    pub target: ConcreteGroup,
    pub elliptic_orders: Vec<u64>,
    pub parabolic_orders: Vec<u64>,
    pub witness: Option<GeneratorImages>,
}

/// Whether every entry of `m` divides one of `l`, `(q - 1)/2`, `(q + 1)/2`
/// for `q = l^e`: exactly the element orders available in `PSL(2,q)`, and
/// the classical criterion for a representation of the cone generators with
/// full orders to exist when there are at least three cone points.
pub fn macbeath_admits(m: &[u64], q: u64) -> Result<bool> {
    if m.len() < 3 {
        return Err(Error::Precondition(format!(
            "the divisibility criterion needs at least 3 cone orders, got {}",
            m.len()
        )));
    }
    if m.iter().any(|&v| v < 2) {
        return Err(Error::Precondition(
            "cone orders must be at least 2".into(),
        ));
    }
    let Some((ell, _)) = odd_prime_power(q) else {
        return Err(Error::Precondition(format!(
            "{q} is not an odd prime power l^e with e <= 3"
        )));
    };
    Ok(m.iter().all(|&v| {
        ell % v == 0 || ((q - 1) / 2).is_multiple_of(v) || q.div_ceil(2).is_multiple_of(v)
    }))
}

fn rotation_mod(value: i128, n: u64) -> u64 {
    value.rem_euclid(n as i128) as u64
}

/// Builds a smooth dihedral quotient of the genus-one signature `(1;0;m)`.
///
/// With `M = lcm(m)`, the images live in `D_2M` for odd `M` and in `D_4M`
/// for even `M`: each cone generator maps to the rotation of exact order
/// `m_i`, one handle generator maps to a rotation balancing the defining
/// relation, and the other maps to a reflection.  The target recorded here
/// is the dihedral subgroup those images actually generate, with the
/// witness rewritten inside it.
pub fn smooth_dihedral(m: &[u64]) -> Result<SmoothRep> {
    if m.is_empty() {
        return Err(Error::Precondition(
            "at least one cone order is required".into(),
        ));
    }
    if m.iter().any(|&v| v < 2) {
        return Err(Error::Precondition(
            "cone orders must be at least 2".into(),
        ));
    }
    let source = Signature::from_parts(1, 0, m)?;
    let cones = source.cones().to_vec();
    let big_m = lcm_all(cones.iter().copied())?;
    let (n, balance) = if big_m % 2 == 1 {
        // Odd M: exponents M/m_i in D_2M; the balancing rotation a = r^alpha
        // with 2*alpha + sum(M/m_i) = 0 mod M, using the half (M+1)/2 of 2.
        let sum: i128 = cones.iter().map(|&v| (big_m / v) as i128).sum();
        (big_m, -(big_m.div_ceil(2) as i128) * sum)
    } else {
        // Even M: exponents 2M/m_i in D_4M; 2*beta + sum(2M/m_i) = 0 mod 2M.
        let sum: i128 = cones.iter().map(|&v| (big_m / v) as i128).sum();
        (2 * big_m, -sum)
    };
    let alpha = rotation_mod(balance, n);
    let exponents: Vec<u64> = cones.iter().map(|&v| n / v).collect();

    let ambient = ConcreteGroup::dihedral(2 * n)?;
    let witness_in_ambient = GeneratorImages {
        handles: vec![(
            GroupElement::Dihedral {
                rotation: alpha,
                reflected: false,
            },
            GroupElement::Dihedral {
                rotation: 0,
                reflected: true,
            },
        )],
        elliptic: exponents
            .iter()
            .map(|&e| GroupElement::Dihedral {
                rotation: e,
                reflected: false,
            })
            .collect(),
        parabolic: Vec::new(),
    };
    if witness_in_ambient.relation_value(&ambient) != ambient.identity() {
        return Err(Error::Internal(
            "dihedral witness fails the defining relation".into(),
        ));
    }

    // The image is generated by the reflection and the rotations r^e; its
    // rotation subgroup is generated by r^t for the gcd t of all exponents.
    let mut t = n;
    for &e in exponents.iter().chain(std::iter::once(&alpha)) {
        t = t.gcd(&e);
    }
    let image_n = n / t;
    let target = ConcreteGroup::dihedral(2 * image_n)?;
    let shrink = |g: &GroupElement| match *g {
        GroupElement::Dihedral {
            rotation,
            reflected,
        } => GroupElement::Dihedral {
            rotation: (rotation / t) % image_n,
            reflected,
        },
        other => other,
    };
    let witness = GeneratorImages {
        handles: witness_in_ambient
            .handles
            .iter()
            .map(|(a, b)| (shrink(a), shrink(b)))
            .collect(),
        elliptic: witness_in_ambient.elliptic.iter().map(shrink).collect(),
        parabolic: Vec::new(),
    };
    if witness.relation_value(&target) != target.identity() {
        return Err(Error::Internal(
            "dihedral witness fails the relation in the image subgroup".into(),
        ));
    }
    Ok(SmoothRep {
        elliptic_orders: cones,
        parabolic_orders: Vec::new(),
        source,
        target,
        witness: Some(witness),
    })
}

fn vp(mut n: u64, p: u64) -> u32 {
    let mut out = 0;
    while n.is_multiple_of(p) {
        n /= p;
        out += 1;
    }
    out
}

fn prime_divisors(n: u64) -> BTreeSet<u64> {
    crate::arith::factor_u128(n as u128)
        .expect("positive integers factor")
        .into_iter()
        .map(|(p, _)| p)
        .collect()
}

/// The congruence system whose solutions `q` make the element orders of
/// `PSL(2,q)` contain `lcm(x)`-compatible orders while excluding every
/// strictly better profile: `q = 1 mod 2X`, and `q` avoids `+-1` modulo a
/// list of obstruction moduli built from the primes where `lcm(x)` falls
/// short of `lcm(m)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeSearchSpec {
    pub x_lcm: u64,
    pub m_lcm: u64,
    /// Primes with `v_p(X) < v_p(M)`.
    pub p: BTreeSet<u64>,
    /// Subset of `p` hit with the modulus `2 p^(v_p(X)+1)`.
    pub p1: BTreeSet<u64>,
    /// Primes `l` with `2l | M`, active when `2` divides `M` more than `X`.
    pub p2: BTreeSet<u64>,
    /// Primes `l` with `3l | M`, active when `3` divides `M` more than `X`.
    pub p3: BTreeSet<u64>,
    /// `2X`: solutions are `1 mod` this.
    pub congruence_modulus: u64,
    /// Deduplicated moduli `w` with the requirement `q != +-1 mod w`.
    pub incongruence_moduli: Vec<u64>,
}

impl PrimeSearchSpec {
    /// Builds the system for a componentwise factor `x` of `m`.
    pub fn new(x: &[u64], m: &[u64]) -> Result<Self> {
        if x.len() != m.len() {
            return Err(Error::Precondition(format!(
                "factor has length {} but the multiset has length {}",
                x.len(),
                m.len()
            )));
        }
        for (&f, &v) in x.iter().zip(m) {
            if f == 0 || v == 0 || v % f != 0 {
                return Err(Error::NotADivisor(f, v));
            }
        }
        let x_lcm = lcm_all(x.iter().copied())?;
        let m_lcm = lcm_all(m.iter().copied())?;
        let p: BTreeSet<u64> = prime_divisors(m_lcm)
            .into_iter()
            .filter(|&q| vp(x_lcm, q) < vp(m_lcm, q))
            .collect();
        let two_in = x_lcm % 2 == 0;
        let three_in = x_lcm % 3 == 0;
        let p1: BTreeSet<u64> = p
            .iter()
            .copied()
            .filter(|&q| (q != 2 || two_in) && (q != 3 || three_in))
            .collect();
        let p2: BTreeSet<u64> = if !two_in && vp(x_lcm, 2) < vp(m_lcm, 2) {
            prime_divisors(m_lcm)
                .into_iter()
                .filter(|&l| {
                    let need = if l == 2 { 4 } else { 2 * l };
                    m_lcm % need == 0
                })
                .collect()
        } else {
            BTreeSet::new()
        };
        let p3: BTreeSet<u64> = if !three_in && vp(x_lcm, 3) < vp(m_lcm, 3) {
            prime_divisors(m_lcm)
                .into_iter()
                .filter(|&l| {
                    let need = if l == 3 { 9 } else { 3 * l };
                    m_lcm % need == 0
                })
                .collect()
        } else {
            BTreeSet::new()
        };
        let mut moduli = BTreeSet::new();
        for &q in &p1 {
            moduli.insert(2 * q.pow(vp(x_lcm, q) + 1));
        }
        for &l in &p2 {
            moduli.insert(4 * l);
        }
        for &l in &p3 {
            moduli.insert(6 * l);
        }
        Ok(PrimeSearchSpec {
            x_lcm,
            m_lcm,
            p,
            p1,
            p2,
            p3,
            congruence_modulus: 2 * x_lcm,
            incongruence_moduli: moduli.into_iter().collect(),
        })
    }

    /// Whether `q` satisfies the full system.
    pub fn admits(&self, q: u64) -> bool {
        q > 1
            && q % self.congruence_modulus == 1
            && self.incongruence_moduli.iter().all(|&w| {
                let r = q % w;
                r != 1 && r != w - 1
            })
    }
}

/// The smallest odd prime power `q = l^e` with `e <= 3` satisfying the
/// congruence system for the factor `x` of `m`, scanning up to `cap`.
pub fn find_q(x: &[u64], m: &[u64], cap: u64) -> Result<u64> {
    find_q_for_spec(&PrimeSearchSpec::new(x, m)?, cap)
}

/// Scan driver for [`find_q`], reusable with a prebuilt system.
pub fn find_q_for_spec(spec: &PrimeSearchSpec, cap: u64) -> Result<u64> {
    let step = spec.congruence_modulus;
    let mut q = 1 + step;
    while q <= cap {
        if spec.admits(q) && odd_prime_power(q).is_some() {
            return Ok(q);
        }
        q = match q.checked_add(step) {
            Some(next) => next,
            None => break,
        };
    }
    Err(Error::ScanCapExceeded { cap })
}

/// The constructive solution of the congruence system: residue choices per
/// obstructed prime, their merge `k`, the arithmetic progression
/// `start + j * step` of solutions, and the first prime found on it.
#[derive(Clone, Debug)]
pub struct ConstructiveQ {
    /// `(p, k_p, modulus)` for each obstructed prime: the class of `k`
    /// modulo `modulus` that clears every obstruction at `p`.
    pub residue_choices: Vec<(u64, u64, u64)>,
    /// A residue merging all the choices: `q = 1 + k * 2X` starts the
    /// progression.
    pub k: u64,
    pub progression_start: u64,
    pub progression_step: u64,
    /// The first prime on the progression, a witness solution.
    pub witness_prime: u64,
}

/// Depth-first merge of one residue choice per prime into a single
/// congruence `k = k_mod (mod modulus)`, backtracking on incompatibility.
fn merge_residues(
    options: &[(u64, u128, Vec<u128>)],
    index: usize,
    k_mod: u128,
    modulus: u128,
    chosen: &mut Vec<(u64, u64, u64)>,
) -> Option<(u128, u128)> {
    let Some((p, period, residues)) = options.get(index) else {
        return Some((k_mod, modulus));
    };
    for &r in residues {
        let g = modulus.gcd(period);
        if r % g != k_mod % g {
            continue;
        }
        let lcm = modulus / g * period;
        let mut k = k_mod;
        while k % period != r {
            k += modulus;
        }
        chosen.push((*p, r as u64, *period as u64));
        if let Some(found) = merge_residues(options, index + 1, k, lcm, chosen) {
            return Some(found);
        }
        chosen.pop();
    }
    None
}

/// Replays the existence proof for the congruence system: picks a residue
/// class per obstructed prime, merges them, and scans the resulting
/// progression (coprime to its step) for a prime witness.  Slower and never
/// smaller than [`find_q`]; used to cross-check the system is solvable.
pub fn constructive_q(spec: &PrimeSearchSpec, cap: u64) -> Result<ConstructiveQ> {
    let two_x = spec.congruence_modulus as u128;
    // Moduli attached to each obstructed prime, merged over set memberships.
    let mut per_prime: Vec<(u64, Vec<u64>)> = Vec::new();
    let all: BTreeSet<u64> = spec
        .p1
        .iter()
        .chain(spec.p2.iter())
        .chain(spec.p3.iter())
        .copied()
        .collect();
    for &p in &all {
        let mut walls = Vec::new();
        if spec.p1.contains(&p) {
            walls.push(2 * p.pow(vp(spec.x_lcm, p) + 1));
        }
        if spec.p2.contains(&p) {
            walls.push(if p == 2 { 8 } else { 4 * p });
        }
        if spec.p3.contains(&p) {
            walls.push(if p == 3 { 18 } else { 6 * p });
        }
        per_prime.push((p, walls));
    }

    // All valid residue classes of k per obstructed prime, then a merge
    // into one congruence.  Periods for distinct primes can share the
    // factors 2 and 3, so a compatible combination is found by backtracking
    // over the per-prime choices.
    let mut options: Vec<(u64, u128, Vec<u128>)> = Vec::new();
    for (p, walls) in &per_prime {
        let mut period = 1u128;
        for &w in walls {
            period = period.lcm(&(w as u128));
        }
        if period > 1_000_000 {
            return Err(Error::Precondition(
                "constructive diagnostics are limited to small obstruction moduli".into(),
            ));
        }
        let residues: Vec<u128> = (0..period)
            .filter(|&k| {
                let q = 1 + k * two_x;
                walls.iter().all(|&w| {
                    let r = q % w as u128;
                    r != 1 && r != w as u128 - 1
                }) && !q.is_multiple_of(*p as u128)
            })
            .collect();
        if residues.is_empty() {
            return Err(Error::Internal(format!(
                "no residue class clears the obstructions at prime {p}"
            )));
        }
        options.push((*p, period, residues));
    }
    let mut residue_choices: Vec<(u64, u64, u64)> = Vec::new();
    let Some((k_mod, modulus)) = merge_residues(&options, 0, 0, 1, &mut residue_choices) else {
        return Err(Error::Internal(
            "the obstruction residues admit no common refinement".into(),
        ));
    };

    let mut step = two_x;
    for &w in &spec.incongruence_moduli {
        step = step.lcm(&(w as u128));
    }
    // Slide k within its class until the progression start is coprime to
    // the step, so the progression contains primes at all.
    let mut k = k_mod;
    let mut tries = 0;
    while BigInt::from(1u128 + k * two_x).gcd(&BigInt::from(step)) != BigInt::one() {
        k += modulus;
        tries += 1;
        if tries > 10_000 {
            return Err(Error::Internal(
                "no progression start coprime to the step was found".into(),
            ));
        }
    }
    let start = 1 + k * two_x;

    let mut q = start;
    loop {
        if q > cap as u128 || q > u64::MAX as u128 {
            return Err(Error::ScanCapExceeded { cap });
        }
        if let Some((_, 1)) = odd_prime_power(q as u64) {
            break;
        }
        q += step;
    }
    let witness_prime = q as u64;
    if !spec.admits(witness_prime) {
        return Err(Error::Internal(format!(
            "constructive witness {witness_prime} fails the congruence system"
        )));
    }
    Ok(ConstructiveQ {
        residue_choices,
        k: k as u64,
        progression_start: start as u64,
        progression_step: step as u64,
        witness_prime,
    })
}

/// Whether a homomorphism with exact elliptic orders `profile` into the
/// context's group exists from the genus-zero compact signature on `m`.
pub fn smooth_representation_exists(context: &EpiSearchContext, m: &[u64]) -> Result<bool> {
    let sig = Signature::from_parts(0, 0, m)?;
    let profile = sig.cones().to_vec();
    Ok(context.find_smooth_homomorphism(&sig, &profile)?.is_some())
}

/// The elliptic order profile of least profile characteristic among all
/// surjections from `s` onto `group`.
///
/// For groups small enough to enumerate, candidate profiles (componentwise
/// divisors of the cone orders, restricted to orders the group contains)
/// are tried in increasing characteristic `chi(c) = 2 - sum(1 - 1/c_i)` and
/// the first realizable one is returned.  For a symbolic `PSL(2,q)` target
/// too large to enumerate, `analytic_scrape` must supply the scrape whose
/// congruence system produced `q`; the answer is then its closure, checked
/// against the divisibility criterion.
pub fn maximal_smoothness(
    group: &ConcreteGroup,
    s: &Signature,
    analytic_scrape: Option<&[u64]>,
) -> Result<Vec<u64>> {
    let order = group.order()?;
    if order <= ENUMERATION_ORDER_LIMIT {
        let context = EpiSearchContext::new(group)?;
        let available = context.available_orders();
        let cones = s.cones().to_vec();
        let mut per_cone: Vec<Vec<u64>> = Vec::with_capacity(cones.len());
        for &m in &cones {
            let choices: Vec<u64> = crate::arith::divisors(m)
                .into_iter()
                .filter(|d| available.contains(d))
                .collect();
            per_cone.push(choices);
        }
        let total: u128 = per_cone.iter().map(|c| c.len() as u128).product();
        if total > 100_000 {
            return Err(Error::EnumerationTooLarge {
                assignments: total,
                limit: 100_000,
            });
        }
        let mut candidates: Vec<Vec<u64>> = vec![Vec::new()];
        for choices in &per_cone {
            candidates = candidates
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |&c| {
                        let mut next = prefix.clone();
                        next.push(c);
                        next
                    })
                })
                .collect();
        }
        let reciprocal_sum = |c: &Vec<u64>| -> BigRational {
            c.iter()
                .map(|&v| BigRational::new(BigInt::one(), BigInt::from(v)))
                .sum()
        };
        candidates.sort_by(|a, b| {
            reciprocal_sum(a)
                .cmp(&reciprocal_sum(b))
                .then_with(|| a.cmp(b))
        });
        for candidate in &candidates {
            if context.find_epimorphism(s, Some(candidate))?.is_some() {
                return Ok(candidate.clone());
            }
        }
        return Err(Error::NotAQuotient {
            group: group.to_string(),
            signature: s.to_string(),
        });
    }
    if let (Descriptor::Psl2 { q }, Some(scrape)) = (group.descriptor(), analytic_scrape) {
        let closure = crate::scrapes::closure(scrape, s.cones())?;
        if !macbeath_admits(&closure, *q)? {
            return Err(Error::Internal(format!(
                "closure profile is not admissible for psl2:{q}"
            )));
        }
        return Ok(closure);
    }
    Err(Error::GroupTooLarge {
        order,
        limit: ENUMERATION_ORDER_LIMIT,
    })
}

/// The signature of the kernel of a surjection with image order
/// `group_order`, parabolic image orders `parabolic_orders`, and elliptic
/// image orders `elliptic_orders`.
///
/// Each puncture with image order `d` lifts to `|G|/d` punctures; each cone
/// of order `m` with image order `c` lifts to `|G|/c` cones of order `m/c`
/// (dropped when trivial); the genus is solved from
/// `2 - 2g' - p' = |G| * chi(g; p; c)`, where the characteristic uses the
/// image orders `c` in place of the cone orders.
pub fn kernel_signature(
    s: &Signature,
    group_order: u128,
    parabolic_orders: &[u64],
    elliptic_orders: &[u64],
) -> Result<Signature> {
    if group_order == 0 {
        return Err(Error::Precondition("the image order must be positive".into()));
    }
    if parabolic_orders.len() as u64 != s.punctures() {
        return Err(Error::Precondition(format!(
            "{} parabolic image orders given for {} punctures",
            parabolic_orders.len(),
            s.punctures()
        )));
    }
    let cones = s.cones();
    if elliptic_orders.len() != cones.len() {
        return Err(Error::Precondition(format!(
            "{} elliptic image orders given for {} cone points",
            elliptic_orders.len(),
            cones.len()
        )));
    }
    for (&c, &m) in elliptic_orders.iter().zip(cones) {
        if c == 0 || m % c != 0 {
            return Err(Error::NotADivisor(c, m));
        }
        if !group_order.is_multiple_of(c as u128) {
            return Err(Error::Precondition(format!(
                "elliptic image order {c} does not divide the image order {group_order}"
            )));
        }
    }
    for &d in parabolic_orders {
        if d == 0 || !group_order.is_multiple_of(d as u128) {
            return Err(Error::Precondition(format!(
                "parabolic image order {d} does not divide the image order {group_order}"
            )));
        }
    }

    let punctures: u128 = parabolic_orders
        .iter()
        .map(|&d| group_order / d as u128)
        .sum();
    let mut kernel_cones: Vec<u64> = Vec::new();
    let mut cone_budget = punctures;
    for (&c, &m) in elliptic_orders.iter().zip(cones) {
        if m / c == 1 {
            continue;
        }
        let copies = group_order / c as u128;
        cone_budget += copies;
        if cone_budget > KERNEL_SIZE_LIMIT {
            return Err(Error::GroupTooLarge {
                order: cone_budget,
                limit: KERNEL_SIZE_LIMIT,
            });
        }
        kernel_cones.extend(std::iter::repeat_n(m / c, copies as usize));
    }
    if punctures > KERNEL_SIZE_LIMIT {
        return Err(Error::GroupTooLarge {
            order: punctures,
            limit: KERNEL_SIZE_LIMIT,
        });
    }

    // chi(g; p; c): the source characteristic with image orders as cones.
    let mut chi_c = BigRational::from_integer(BigInt::from(
        2i128 - 2 * s.genus() as i128 - s.punctures() as i128,
    ));
    for &c in elliptic_orders {
        chi_c -= BigRational::new(BigInt::from(c - 1), BigInt::from(c));
    }
    let doubled_genus = BigRational::from_integer(BigInt::from(2) - BigInt::from(punctures))
        - BigRational::from_integer(BigInt::from(group_order)) * chi_c;
    let doubled_genus = if doubled_genus.is_integer() {
        doubled_genus.to_integer()
    } else {
        return Err(Error::Precondition(format!(
            "image orders are inconsistent: kernel genus would solve to {doubled_genus}"
        )));
    };
    if doubled_genus.is_negative() || doubled_genus.is_odd() {
        return Err(Error::Precondition(format!(
            "image orders are inconsistent: twice the kernel genus would be {doubled_genus}"
        )));
    }
    let genus: u64 = (doubled_genus / BigInt::from(2)).try_into().map_err(|_| {
        Error::Precondition("kernel genus exceeds the supported range".into())
    })?;
    Signature::from_parts(genus, punctures as u64, &kernel_cones)
}
