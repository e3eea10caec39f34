//! Exact arithmetic in Z[x]/(x^N - 1) and its quotients mod q and mod 3.
//!
//! Coefficients of [`ModPoly`] are kept canonical in `[0, modulus)`;
//! centerlifted values live in the distinct [`IntegerPoly`] type so the two
//! representations can never be mixed up.

use rand::Rng;

use crate::error::Error;

/// A polynomial in (Z/modulus)[x]/(x^N - 1), coefficients canonical in `[0, modulus)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModPoly {
    coeffs: Vec<u64>,
    modulus: u64,
}

/// A polynomial with coefficients in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TernaryPoly {
    coeffs: Vec<i8>,
}

/// A polynomial over Z, the target of centerlifting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerPoly {
    coeffs: Vec<i64>,
}

impl ModPoly {
    pub fn new(coeffs: Vec<u64>, modulus: u64) -> Result<Self, Error> {
        if modulus == 0 {
            return Err(Error::Parameter("modulus must be positive".into()));
        }
        if coeffs.iter().any(|&c| c >= modulus) {
            return Err(Error::Parameter(format!(
                "coefficient out of canonical range [0, {modulus})"
            )));
        }
        Ok(Self { coeffs, modulus })
    }

    /// Builds from arbitrary signed integers, reducing into `[0, modulus)`.
    pub fn from_signed(coeffs: &[i64], modulus: u64) -> Self {
        let m = modulus as i64;
        Self {
            coeffs: coeffs.iter().map(|&c| c.rem_euclid(m) as u64).collect(),
            modulus,
        }
    }

    pub fn zero(n: usize, modulus: u64) -> Self {
        Self { coeffs: vec![0; n], modulus }
    }

    pub fn one(n: usize, modulus: u64) -> Self {
        let mut coeffs = vec![0; n];
        coeffs[0] = 1 % modulus;
        Self { coeffs, modulus }
    }

    pub fn degree_n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> u64 {
        self.coeffs[i]
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0] == 1 && self.coeffs[1..].iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &Self) -> Result<Self, Error> {
        check_compat(self, other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| (a + b) % self.modulus)
            .collect();
        Ok(Self { coeffs, modulus: self.modulus })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, Error> {
        check_compat(self, other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| (a + self.modulus - b) % self.modulus)
            .collect();
        Ok(Self { coeffs, modulus: self.modulus })
    }

    pub fn scale(&self, s: u64) -> Self {
        let s = s % self.modulus;
        let coeffs = self.coeffs.iter().map(|&a| a * s % self.modulus).collect();
        Self { coeffs, modulus: self.modulus }
    }
}

impl TernaryPoly {
    pub fn new(coeffs: Vec<i8>) -> Result<Self, Error> {
        if coeffs.iter().any(|&c| !(-1..=1).contains(&c)) {
            return Err(Error::Parameter("coefficients must lie in {-1,0,1}".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn zero(n: usize) -> Self {
        Self { coeffs: vec![0; n] }
    }

    pub fn degree_n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> i8 {
        self.coeffs[i]
    }

    /// Number of +1 and -1 coefficients.
    pub fn weights(&self) -> (usize, usize) {
        let ones = self.coeffs.iter().filter(|&&c| c == 1).count();
        let neg = self.coeffs.iter().filter(|&&c| c == -1).count();
        (ones, neg)
    }

    pub fn squared_norm(&self) -> u64 {
        self.coeffs.iter().filter(|&&c| c != 0).count() as u64
    }

    pub fn to_mod(&self, modulus: u64) -> ModPoly {
        let signed: Vec<i64> = self.coeffs.iter().map(|&c| c as i64).collect();
        ModPoly::from_signed(&signed, modulus)
    }
}

impl IntegerPoly {
    pub fn new(coeffs: Vec<i64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn degree_n(&self) -> usize {
        self.coeffs.len()
    }

    /// Reduces into `[0, modulus)`.
    pub fn to_mod(&self, modulus: u64) -> ModPoly {
        ModPoly::from_signed(&self.coeffs, modulus)
    }

    /// Every coefficient in {-1,0,1}?
    pub fn as_ternary(&self) -> Option<TernaryPoly> {
        let coeffs: Option<Vec<i8>> = self
            .coeffs
            .iter()
            .map(|&c| if (-1..=1).contains(&c) { Some(c as i8) } else { None })
            .collect();
        coeffs.map(|c| TernaryPoly { coeffs: c })
    }
}

fn check_compat(a: &ModPoly, b: &ModPoly) -> Result<(), Error> {
    if a.coeffs.len() != b.coeffs.len() {
        return Err(Error::Parameter(format!(
            "ring degree mismatch: {} vs {}",
            a.coeffs.len(),
            b.coeffs.len()
        )));
    }
    if a.modulus != b.modulus {
        return Err(Error::Parameter(format!(
            "modulus mismatch: {} vs {}",
            a.modulus, b.modulus
        )));
    }
    Ok(())
}

/// Cyclic convolution in (Z/q)[x]/(x^N - 1): c_k = sum_{i+j = k mod N} a_i b_j.
pub fn conv_mod(a: &ModPoly, b: &ModPoly) -> Result<ModPoly, Error> {
    check_compat(a, b)?;
    let n = a.coeffs.len();
    let q = a.modulus;
    let mut out = vec![0u128; n];
    for (i, &ai) in a.coeffs.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.coeffs.iter().enumerate() {
            let k = if i + j >= n { i + j - n } else { i + j };
            out[k] += ai as u128 * bj as u128;
        }
    }
    let coeffs = out.iter().map(|&c| (c % q as u128) as u64).collect();
    Ok(ModPoly { coeffs, modulus: q })
}

/// Centerlift: map each coefficient of `p` into (-q/2, q/2].
pub fn centerlift(p: &ModPoly) -> IntegerPoly {
    let q = p.modulus as i64;
    let coeffs = p
        .coeffs
        .iter()
        .map(|&c| {
            let c = c as i64;
            if 2 * c > q {
                c - q
            } else {
                c
            }
        })
        .collect();
    IntegerPoly { coeffs }
}

/// Inverse of 3 modulo q. Errors when 3 | q.
pub fn inv3_mod_q(q: u64) -> Result<u64, Error> {
    if q % 3 == 0 {
        return Err(Error::Parameter("3 divides q, no inverse".into()));
    }
    // ext gcd on the scalar
    let (mut r0, mut r1) = (q as i64, 3i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let qt = r0 / r1;
        (r0, r1) = (r1, r0 - qt * r1);
        (t0, t1) = (t1, t0 - qt * t1);
    }
    debug_assert_eq!(r0, 1);
    Ok(t0.rem_euclid(q as i64) as u64)
}

/// Uniform ternary polynomial of degree at most N-2 (top coefficient zero).
pub fn sample_ternary<R: Rng>(n: usize, rng: &mut R) -> TernaryPoly {
    let mut coeffs = vec![0i8; n];
    for c in coeffs.iter_mut().take(n - 1) {
        *c = rng.gen_range(-1i8..=1);
    }
    TernaryPoly { coeffs }
}

/// Fixed-weight ternary polynomial of degree at most N-2 with exactly
/// `d1` ones and `d2` minus-ones, uniformly placed.
pub fn sample_fixed_weight<R: Rng>(
    n: usize,
    d1: usize,
    d2: usize,
    rng: &mut R,
) -> Result<TernaryPoly, Error> {
    if d1 + d2 > n - 1 {
        return Err(Error::Parameter(format!(
            "weights d1+d2 = {} exceed available positions {}",
            d1 + d2,
            n - 1
        )));
    }
    // Fisher-Yates over the N-1 admissible positions.
    let mut positions: Vec<usize> = (0..n - 1).collect();
    for i in (1..positions.len()).rev() {
        let j = rng.gen_range(0..=i);
        positions.swap(i, j);
    }
    let mut coeffs = vec![0i8; n];
    for &p in &positions[..d1] {
        coeffs[p] = 1;
    }
    for &p in &positions[d1..d1 + d2] {
        coeffs[p] = -1;
    }
    Ok(TernaryPoly { coeffs })
}

/// Inverse of `f` in (Z/modulus)[x]/(x^N - 1).
///
/// For modulus 3 (or any small prime) this is the extended Euclidean
/// algorithm over GF(p)[x]. For modulus 2^e the inverse mod 2 is Hensel
/// lifted by the squaring trick F <- F(2 - fF).
pub fn invert_poly(f: &ModPoly, modulus: u64) -> Result<ModPoly, Error> {
    let n = f.coeffs.len();
    if modulus == 3 {
        let lifted = ModPoly::from_signed(
            &f.coeffs.iter().map(|&c| c as i64).collect::<Vec<_>>(),
            3,
        );
        return invert_mod_prime(&lifted, 3);
    }
    if !modulus.is_power_of_two() {
        return Err(Error::Parameter(
            "modulus must be 3 or a power of two".into(),
        ));
    }
    // Base case: invert mod 2.
    let f2 = ModPoly::from_signed(
        &f.coeffs.iter().map(|&c| c as i64).collect::<Vec<_>>(),
        2,
    );
    let inv2 = invert_mod_prime(&f2, 2)?;
    if modulus == 2 {
        return Ok(inv2);
    }
    // Lift: one squaring round doubles the 2-adic precision. Working mod
    // the full modulus throughout is harmless and simpler.
    let fq = ModPoly { coeffs: f.coeffs.iter().map(|&c| c % modulus).collect(), modulus };
    let mut inv = ModPoly {
        coeffs: inv2.coeffs.iter().map(|&c| c % modulus).collect(),
        modulus,
    };
    let e = modulus.trailing_zeros();
    let mut precision = 1u32;
    while precision < e {
        let two = ModPoly::from_signed(&{
            let mut v = vec![0i64; n];
            v[0] = 2;
            v
        }, modulus);
        let t = two.sub(&conv_mod(&fq, &inv)?)?;
        inv = conv_mod(&inv, &t)?;
        precision *= 2;
    }
    debug_assert!(conv_mod(&fq, &inv)?.is_one());
    Ok(inv)
}

/// Extended Euclid over GF(p)[x] against x^N - 1.
fn invert_mod_prime(f: &ModPoly, p: u64) -> Result<ModPoly, Error> {
    let n = f.coeffs.len();
    // x^N - 1 over GF(p), one degree higher than ring elements.
    let mut modpoly = vec![0u64; n + 1];
    modpoly[0] = p - 1;
    modpoly[n] = 1;

    let mut r0 = modpoly;
    let mut r1 = f.coeffs.clone();
    trim(&mut r1);
    let mut t0: Vec<u64> = vec![];
    let mut t1: Vec<u64> = vec![1];

    while !r1.is_empty() {
        let (quot, rem) = poly_divmod(&r0, &r1, p);
        let t2 = poly_sub(&t0, &poly_mul(&quot, &t1, p), p);
        r0 = r1;
        r1 = rem;
        t0 = t1;
        t1 = t2;
    }
    // gcd = r0 with t0 * f = r0 mod (x^N - 1); invertible iff gcd is a unit.
    if poly_deg(&r0) > 0 {
        return Err(Error::NotInvertible);
    }
    let cinv = scalar_inv(r0[0], p);
    let mut inv = poly_scale(&t0, cinv, p);
    // reduce mod x^N - 1 (wrap high coefficients)
    let mut out = vec![0u64; n];
    for (i, &coef) in inv.iter().enumerate() {
        out[i % n] = (out[i % n] + coef) % p;
    }
    inv = out;
    let result = ModPoly { coeffs: inv, modulus: p };
    debug_assert!(conv_mod(&result, &ModPoly { coeffs: f.coeffs.clone(), modulus: p })?.is_one());
    Ok(result)
}

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn poly_deg(v: &[u64]) -> usize {
    v.len().saturating_sub(1)
}

fn scalar_inv(a: u64, p: u64) -> u64 {
    // p is tiny (2 or 3); brute force.
    (1..p).find(|&x| a * x % p == 1).expect("unit in GF(p)")
}

fn poly_divmod(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rem = a.to_vec();
    trim(&mut rem);
    let db = poly_deg(b);
    let lead_inv = scalar_inv(b[db], p);
    let mut quot = vec![0u64; rem.len().saturating_sub(db)];
    while rem.len() > db {
        let dr = rem.len() - 1;
        let c = rem[dr] * lead_inv % p;
        quot[dr - db] = c;
        for i in 0..=db {
            let idx = dr - db + i;
            rem[idx] = (rem[idx] + p - c * b[i] % p) % p;
        }
        trim(&mut rem);
    }
    (quot, rem)
}

fn poly_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + ai * bj) % p;
        }
    }
    trim(&mut out);
    out
}

fn poly_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let len = a.len().max(b.len());
    let mut out = vec![0u64; len];
    for i in 0..len {
        let ai = a.get(i).copied().unwrap_or(0);
        let bi = b.get(i).copied().unwrap_or(0);
        out[i] = (ai + p - bi) % p;
    }
    trim(&mut out);
    out
}

fn poly_scale(a: &[u64], c: u64, p: u64) -> Vec<u64> {
    a.iter().map(|&x| x * c % p).collect()
}
