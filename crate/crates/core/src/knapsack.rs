//! The mod-q modular-knapsack system built from a ciphertext and leaked
//! coefficients, its reduced variant when nonce coefficients are also
//! known, and a brute-force oracle for small instances.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::poly::{inv3_mod_q, ModPoly};

/// The linear system A X = T over Z_q with the solution bounded in {-1,0,1}.
///
/// Entries are kept as big integers: downstream lattice scaling by N2
/// overflows any fixed width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnapsackSystem {
    /// k x n matrix, entries canonical in [0, q).
    pub a: Vec<Vec<BigInt>>,
    /// length-k target, canonical in [0, q).
    pub t: Vec<BigInt>,
    pub q: u64,
    /// original coefficient index for each column of `a`.
    pub column_map: Vec<usize>,
}

/// Which coefficients of m and r the attacker knows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeakProfile {
    pub known_m: BTreeMap<usize, i8>,
    pub known_r: BTreeMap<usize, i8>,
}

impl LeakProfile {
    pub fn validate(&self, n: usize) -> Result<(), Error> {
        for (&pos, &val) in self.known_m.iter().chain(self.known_r.iter()) {
            if pos >= n {
                return Err(Error::Parameter(format!("leak position {pos} out of range")));
            }
            if !(-1..=1).contains(&val) {
                return Err(Error::Parameter(format!("leaked value {val} not ternary")));
            }
        }
        Ok(())
    }
}

impl KnapsackSystem {
    pub fn rows(&self) -> usize {
        self.t.len()
    }

    pub fn cols(&self) -> usize {
        self.column_map.len()
    }

    /// A . x mod q for a ternary vector x.
    fn apply(&self, x: &[i8]) -> Vec<BigInt> {
        let q = BigInt::from(self.q);
        self.a
            .iter()
            .map(|row| {
                let mut acc = BigInt::zero();
                for (aij, &xi) in row.iter().zip(x) {
                    match xi {
                        1 => acc += aij,
                        -1 => acc -= aij,
                        _ => {}
                    }
                }
                acc.mod_floor(&q)
            })
            .collect()
    }
}

/// The targets a_i = 3^{-1}(c_i - m_i) mod q for each leaked index, in
/// ascending index order.
pub fn target_entries(
    c: &ModPoly,
    known_m: &BTreeMap<usize, i8>,
    q: u64,
) -> Result<Vec<u64>, Error> {
    let inv3 = inv3_mod_q(q)?;
    Ok(known_m
        .iter()
        .map(|(&i, &mi)| {
            let diff = (c.coeff(i) as i64 - mi as i64).rem_euclid(q as i64) as u64;
            (inv3 as u128 * diff as u128 % q as u128) as u64
        })
        .collect())
}

/// Row for leaked index l: (h_{l mod N}, h_{l-1 mod N}, ..., h_{l-(N-1) mod N}).
pub fn circulant_rows(h: &ModPoly, indices: impl IntoIterator<Item = usize>) -> Vec<Vec<u64>> {
    let n = h.degree_n();
    indices
        .into_iter()
        .map(|l| {
            (0..n)
                .map(|j| h.coeff((l + n - j % n) % n))
                .collect()
        })
        .collect()
}

/// Builds the k1 x N system from the ciphertext and the leaked message
/// coefficients. The true nonce r solves A r = T mod q by construction.
pub fn build_system(c: &ModPoly, h: &ModPoly, leak: &LeakProfile) -> Result<KnapsackSystem, Error> {
    let n = h.degree_n();
    leak.validate(n)?;
    if leak.known_m.is_empty() {
        return Err(Error::Parameter("at least one leaked message coefficient required".into()));
    }
    let q = h.modulus();
    let t = target_entries(c, &leak.known_m, q)?;
    let rows = circulant_rows(h, leak.known_m.keys().copied());
    Ok(KnapsackSystem {
        a: rows
            .into_iter()
            .map(|r| r.into_iter().map(BigInt::from).collect())
            .collect(),
        t: t.into_iter().map(BigInt::from).collect(),
        q,
        column_map: (0..n).collect(),
    })
}

/// Removes the columns at known nonce positions and folds their
/// contribution into the target: T_z = T - S with
/// S = sum_{i: r_i = 1} col_i(A) - sum_{i: r_i = -1} col_i(A).
pub fn reduce_system_with_known_r(
    sys: &KnapsackSystem,
    known_r: &BTreeMap<usize, i8>,
) -> KnapsackSystem {
    if known_r.is_empty() {
        return sys.clone();
    }
    let q = BigInt::from(sys.q);
    let mut t_z = sys.t.clone();
    for (row_idx, row) in sys.a.iter().enumerate() {
        let mut s = BigInt::zero();
        for (col_idx, &orig) in sys.column_map.iter().enumerate() {
            match known_r.get(&orig) {
                Some(1) => s += &row[col_idx],
                Some(-1) => s -= &row[col_idx],
                _ => {}
            }
        }
        t_z[row_idx] = (&t_z[row_idx] - s).mod_floor(&q);
    }
    let keep: Vec<usize> = (0..sys.cols())
        .filter(|&j| !known_r.contains_key(&sys.column_map[j]))
        .collect();
    KnapsackSystem {
        a: sys
            .a
            .iter()
            .map(|row| keep.iter().map(|&j| row[j].clone()).collect())
            .collect(),
        t: t_z,
        q: sys.q,
        column_map: keep.iter().map(|&j| sys.column_map[j]).collect(),
    }
}

/// Exhaustive 3^n search for every ternary x with A x = T mod q, in
/// lexicographic order (-1 < 0 < 1).
pub fn brute_force_solve(sys: &KnapsackSystem, limit: usize) -> Result<Vec<Vec<i8>>, Error> {
    let n = sys.cols();
    if n > limit {
        return Err(Error::Parameter(format!(
            "{n} columns exceed the 3^n enumeration limit {limit}"
        )));
    }
    let mut solutions = Vec::new();
    let mut x = vec![-1i8; n];
    loop {
        if verify_solution(sys, &x)? {
            solutions.push(x.clone());
        }
        // next vector in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(solutions);
            }
            i -= 1;
            if x[i] < 1 {
                x[i] += 1;
                for v in &mut x[i + 1..] {
                    *v = -1;
                }
                break;
            }
        }
    }
}

/// True iff x is ternary and A x = T mod q.
pub fn verify_solution(sys: &KnapsackSystem, x: &[i8]) -> Result<bool, Error> {
    if x.len() != sys.cols() {
        return Err(Error::Parameter(format!(
            "solution length {} does not match {} columns",
            x.len(),
            sys.cols()
        )));
    }
    if x.iter().any(|&v| !(-1..=1).contains(&v)) {
        return Ok(false);
    }
    Ok(sys.apply(x) == sys.t)
}

/// JSON form: {q, k, n, A row-major, T, column_map}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnapsackSystemRecord {
    pub q: u64,
    pub k: usize,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<u64>,
    #[serde(rename = "T")]
    pub t: Vec<u64>,
    pub column_map: Vec<usize>,
}

impl KnapsackSystemRecord {
    pub fn from_system(sys: &KnapsackSystem) -> Self {
        Self {
            q: sys.q,
            k: sys.rows(),
            n: sys.cols(),
            a: sys
                .a
                .iter()
                .flat_map(|row| row.iter().map(|v| v.to_u64().expect("entry < q")))
                .collect(),
            t: sys.t.iter().map(|v| v.to_u64().expect("entry < q")).collect(),
            column_map: sys.column_map.clone(),
        }
    }

    pub fn into_system(self) -> Result<KnapsackSystem, Error> {
        if self.a.len() != self.k * self.n
            || self.t.len() != self.k
            || self.column_map.len() != self.n
        {
            return Err(Error::Parameter("inconsistent system dimensions".into()));
        }
        if self.a.iter().chain(self.t.iter()).any(|&v| v >= self.q) {
            return Err(Error::Parameter("entry out of canonical range".into()));
        }
        Ok(KnapsackSystem {
            a: self
                .a
                .chunks(self.n)
                .map(|row| row.iter().map(|&v| BigInt::from(v)).collect())
                .collect(),
            t: self.t.into_iter().map(BigInt::from).collect(),
            q: self.q,
            column_map: self.column_map,
        })
    }
}
