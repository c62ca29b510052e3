//! Arithmetic in a prime field GF(p) and Lagrange interpolation.
//!
//! Elements carry their modulus so mixed-field mistakes fail fast. Values are
//! plain residues; at the scales this toolkit targets (p < 2^32) there is no
//! need for Montgomery form, and primality is checked once per construction
//! site by trial division.

use crate::error::{Error, Result};
use crate::randomness::BitReader;
use rand::Rng;
use serde::Deserialize;

/// Largest supported modulus; trial-division primality checking is the
/// bottleneck that sets this bound.
pub const MAX_MODULUS: u64 = 1 << 32;

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p.is_multiple_of(2) {
        return p == 2;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Validate a modulus once; element constructors inside the crate then use
/// the unchecked path.
pub fn check_modulus(p: u64) -> Result<()> {
    if p >= MAX_MODULUS {
        return Err(Error::InvalidModulus {
            modulus: p,
            reason: "modulus must be below 2^32",
        });
    }
    if !is_prime(p) {
        return Err(Error::InvalidModulus {
            modulus: p,
            reason: "modulus must be prime",
        });
    }
    Ok(())
}

/// Smallest prime >= `n`. Used to pick default moduli for permanent
/// instances, which need at least `n + 2` distinct field points.
pub fn next_prime_at_least(n: u64) -> u64 {
    let mut c = n.max(2);
    loop {
        if is_prime(c) {
            return c;
        }
        c += 1;
    }
}

/// Default modulus for n x n permanent instances: the smallest prime at
/// least max(n + 2, 257). The self-reduction needs n + 1 distinct nonzero
/// sample points (hence n + 2), and 257 leaves statistical headroom.
pub fn default_modulus_for_dimension(n: usize) -> u64 {
    next_prime_at_least((n as u64 + 2).max(257))
}

/// A residue in GF(p).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

impl FieldElement {
    /// Construct with full validation of the modulus.
    pub fn new(value: u64, modulus: u64) -> Result<Self> {
        check_modulus(modulus)?;
        Ok(Self::reduced(value, modulus))
    }

    /// Construct assuming `modulus` was already validated.
    pub(crate) fn reduced(value: u64, modulus: u64) -> Self {
        Self {
            value: value % modulus,
            modulus,
        }
    }

    pub fn zero(modulus: u64) -> Self {
        Self::reduced(0, modulus)
    }

    pub fn one(modulus: u64) -> Self {
        Self::reduced(1, modulus)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch {
                left: self.modulus,
                right: other.modulus,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_field(other).expect("field op on mixed moduli");
        let mut s = self.value + other.value;
        if s >= self.modulus {
            s -= self.modulus;
        }
        Self {
            value: s,
            modulus: self.modulus,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.same_field(other).expect("field op on mixed moduli");
        let v = if self.value >= other.value {
            self.value - other.value
        } else {
            self.modulus - (other.value - self.value)
        };
        Self {
            value: v,
            modulus: self.modulus,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.same_field(other).expect("field op on mixed moduli");
        Self {
            value: ((self.value as u128 * other.value as u128) % self.modulus as u128) as u64,
            modulus: self.modulus,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            value: if self.value == 0 {
                0
            } else {
                self.modulus - self.value
            },
            modulus: self.modulus,
        }
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inverse(&self) -> Result<Self> {
        if self.value == 0 {
            return Err(Error::NoInverse {
                modulus: self.modulus,
            });
        }
        let (mut r0, mut r1) = (self.modulus as i128, self.value as i128);
        let (mut s0, mut s1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        debug_assert_eq!(r0, 1, "modulus is prime, gcd with nonzero must be 1");
        let m = self.modulus as i128;
        Ok(Self {
            value: (s0.rem_euclid(m)) as u64,
            modulus: self.modulus,
        })
    }

    /// Uniform element, drawn directly from an RNG.
    pub fn random(modulus: u64, rng: &mut impl Rng) -> Self {
        Self::reduced(rng.gen_range(0..modulus), modulus)
    }

    /// Uniform element read from a bit tape: 64 raw bits reduced mod p.
    /// The reduction bias is at most p / 2^64, invisible at this crate's
    /// statistical resolutions.
    pub fn from_tape(modulus: u64, reader: &mut BitReader<'_>) -> Self {
        Self::reduced(reader.take_u64(64), modulus)
    }
}

impl std::fmt::Display for FieldElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl std::ops::Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        FieldElement::add(&self, &rhs)
    }
}

impl std::ops::Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        FieldElement::sub(&self, &rhs)
    }
}

impl std::ops::Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        FieldElement::mul(&self, &rhs)
    }
}

/// A square matrix over GF(p), the carrier of permanent instances.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FieldMatrix {
    dimension: usize,
    modulus: u64,
    entries: Vec<u64>, // row-major residues
}

#[derive(Deserialize)]
struct MatrixDoc {
    modulus: u64,
    entries: Vec<Vec<u64>>,
}

impl FieldMatrix {
    pub fn new(modulus: u64, rows: Vec<Vec<u64>>) -> Result<Self> {
        check_modulus(modulus)?;
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix {
                message: "matrix must have positive dimension".into(),
            });
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::InvalidMatrix {
                    message: format!("expected {n} columns, found {}", row.len()),
                });
            }
            entries.extend(row.iter().map(|&v| v % modulus));
        }
        Ok(Self {
            dimension: n,
            modulus,
            entries,
        })
    }

    /// Ingest the JSON document form `{"modulus": p, "entries": [[...], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MatrixDoc = serde_json::from_str(text).map_err(|e| Error::InvalidMatrix {
            message: format!("bad matrix JSON: {e}"),
        })?;
        Self::new(doc.modulus, doc.entries)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn get(&self, row: usize, col: usize) -> FieldElement {
        FieldElement::reduced(self.entries[row * self.dimension + col], self.modulus)
    }

    pub(crate) fn raw(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.dimension + col]
    }

    pub fn identity(n: usize, modulus: u64) -> Result<Self> {
        check_modulus(modulus)?;
        let mut entries = vec![0u64; n * n];
        for i in 0..n {
            entries[i * n + i] = 1 % modulus;
        }
        Ok(Self {
            dimension: n,
            modulus,
            entries,
        })
    }

    pub fn random(n: usize, modulus: u64, rng: &mut impl Rng) -> Result<Self> {
        check_modulus(modulus)?;
        Ok(Self {
            dimension: n,
            modulus,
            entries: (0..n * n).map(|_| rng.gen_range(0..modulus)).collect(),
        })
    }

    /// Uniform matrix read from a bit tape, 64 bits per entry.
    pub fn from_tape(n: usize, modulus: u64, reader: &mut BitReader<'_>) -> Self {
        Self {
            dimension: n,
            modulus,
            entries: (0..n * n).map(|_| reader.take_u64(64) % modulus).collect(),
        }
    }

    /// self + t * other, entrywise.
    pub fn add_scaled(&self, t: FieldElement, other: &FieldMatrix) -> FieldMatrix {
        assert_eq!(self.dimension, other.dimension, "dimension mismatch");
        assert_eq!(self.modulus, other.modulus, "modulus mismatch");
        assert_eq!(t.modulus(), self.modulus, "modulus mismatch");
        let p = self.modulus as u128;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| ((a as u128 + t.value() as u128 * b as u128) % p) as u64)
            .collect();
        FieldMatrix {
            dimension: self.dimension,
            modulus: self.modulus,
            entries,
        }
    }
}

/// Dense univariate polynomial over GF(p), lowest-degree coefficient first.
/// Trailing zero coefficients are stripped; the zero polynomial has no
/// coefficients at all.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FieldPolynomial {
    coefficients: Vec<FieldElement>,
}

impl FieldPolynomial {
    pub fn new(mut coefficients: Vec<FieldElement>) -> Self {
        while coefficients.last().is_some_and(|c| c.is_zero()) {
            coefficients.pop();
        }
        Self { coefficients }
    }

    pub fn zero() -> Self {
        Self {
            coefficients: Vec::new(),
        }
    }

    pub fn constant(c: FieldElement) -> Self {
        Self::new(vec![c])
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Horner evaluation.
    pub fn evaluate(&self, t: FieldElement) -> FieldElement {
        let mut acc = FieldElement::zero(t.modulus());
        for c in self.coefficients.iter().rev() {
            assert_eq!(c.modulus(), t.modulus(), "modulus mismatch");
            acc = acc.mul(&t).add(c);
        }
        acc
    }
}

/// Interpolate the unique polynomial of degree < `points.len()` through the
/// given nodes. Duplicate x-coordinates are rejected.
pub fn lagrange_interpolate(points: &[(FieldElement, FieldElement)]) -> Result<FieldPolynomial> {
    if points.is_empty() {
        return Err(Error::DegenerateNodes);
    }
    let p = points[0].0.modulus();
    for (x, y) in points {
        if x.modulus() != p || y.modulus() != p {
            return Err(Error::ModulusMismatch {
                left: p,
                right: x.modulus().max(y.modulus()),
            });
        }
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].0 == points[j].0 {
                return Err(Error::DegenerateNodes);
            }
        }
    }

    // master(X) = prod_i (X - x_i)
    let mut master = vec![FieldElement::one(p)];
    for (x, _) in points {
        let mut next = vec![FieldElement::zero(p); master.len() + 1];
        for (d, c) in master.iter().enumerate() {
            next[d + 1] = next[d + 1].add(c);
            next[d] = next[d].sub(&c.mul(x));
        }
        master = next;
    }

    let mut acc = vec![FieldElement::zero(p); points.len()];
    for (x_i, y_i) in points {
        // basis_i = master / (X - x_i), by synthetic division at the root x_i
        let mut basis = vec![FieldElement::zero(p); master.len() - 1];
        let mut carry = FieldElement::zero(p);
        for d in (0..master.len() - 1).rev() {
            carry = master[d + 1].add(&carry.mul(x_i));
            basis[d] = carry;
        }
        // scale by y_i / basis_i(x_i)
        let mut denom = FieldElement::zero(p);
        for c in basis.iter().rev() {
            denom = denom.mul(x_i).add(c);
        }
        let scale = y_i.mul(&denom.inverse().expect("distinct nodes give nonzero denominator"));
        for (a, b) in acc.iter_mut().zip(&basis) {
            *a = a.add(&b.mul(&scale));
        }
    }
    Ok(FieldPolynomial::new(acc))
}
