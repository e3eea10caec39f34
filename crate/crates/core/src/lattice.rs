//! The embedding lattices B_k and B_z, exact determinants, solution
//! embedding and exact lattice-membership tests.
//!
//! Row-vector convention throughout: the rows of an [`IntegerBasis`]
//! are the basis vectors b_0 ... b_{N'+k}.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::knapsack::KnapsackSystem;

/// Scaling integers N1 < N2 for the embedding. N2 is configured through
/// an exponent x as N2 = q^x.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingParams {
    pub n1: BigInt,
    pub n2: BigInt,
}

impl ScalingParams {
    pub fn new(n1: BigInt, n2: BigInt) -> Result<Self, Error> {
        if n1 < BigInt::one() {
            return Err(Error::Parameter("N1 must be at least 1".into()));
        }
        if n1 >= n2 {
            return Err(Error::Parameter("N1 < N2 required".into()));
        }
        Ok(Self { n1, n2 })
    }

    /// N2 = q^x (the tables' "x : N2 = ceil(q^x)" column; q^x is integral).
    pub fn from_exponent(n1: u64, q: u64, x: u32) -> Result<Self, Error> {
        Self::new(BigInt::from(n1), BigInt::from(q).pow(x))
    }
}

/// A square big-integer matrix whose rows generate a lattice, with the
/// block dimensions of the embedding remembered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerBasis {
    pub rows: Vec<Vec<BigInt>>,
    /// columns of the underlying knapsack system (N for B_k, N-k2 for B_z)
    pub n_prime: usize,
    /// equations in the system
    pub k: usize,
}

impl IntegerBasis {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// |det| by fraction-free (Bareiss) elimination, exact.
    pub fn det_abs(&self) -> BigInt {
        det_bareiss(&self.rows).abs()
    }
}

/// The (N'+k+1)-square embedding basis:
///
/// ```text
/// [ I_N'      | 0   | N2 A^T   ]
/// [ 0         | N1  | -N2 T^T  ]
/// [ 0         | 0   | N2 q I_k ]
/// ```
pub fn build_bk(sys: &KnapsackSystem, scale: &ScalingParams) -> IntegerBasis {
    let n = sys.cols();
    let k = sys.rows();
    let dim = n + k + 1;
    let mut rows = vec![vec![BigInt::zero(); dim]; dim];
    for i in 0..n {
        rows[i][i] = BigInt::one();
        for j in 0..k {
            rows[i][n + 1 + j] = &scale.n2 * &sys.a[j][i];
        }
    }
    rows[n][n] = scale.n1.clone();
    for j in 0..k {
        rows[n][n + 1 + j] = -(&scale.n2 * &sys.t[j]);
    }
    let n2q = &scale.n2 * BigInt::from(sys.q);
    for j in 0..k {
        rows[n + 1 + j][n + 1 + j] = n2q.clone();
    }
    IntegerBasis { rows, n_prime: n, k }
}

/// B_z is the same block construction applied to the reduced system; with
/// k2 = 0 it is bit-identical to `build_bk` of the original system.
pub fn build_bz(sys_z: &KnapsackSystem, scale: &ScalingParams) -> IntegerBasis {
    build_bk(sys_z, scale)
}

/// Embeds a candidate solution as the lattice vector (x, N1, 0_k).
pub fn embed_solution(x: &[i8], scale: &ScalingParams, k: usize) -> Vec<BigInt> {
    let mut v: Vec<BigInt> = x.iter().map(|&c| BigInt::from(c)).collect();
    v.push(scale.n1.clone());
    v.extend(std::iter::repeat_with(BigInt::zero).take(k));
    v
}

/// Exact membership: is v an integer combination of the rows of B?
///
/// Solves c B = v over the rationals and checks integrality.
pub fn is_lattice_point(basis: &IntegerBasis, v: &[BigInt]) -> Result<bool, Error> {
    let dim = basis.dim();
    if v.len() != dim {
        return Err(Error::Parameter(format!(
            "vector length {} does not match basis dimension {dim}",
            v.len()
        )));
    }
    // augmented system B^T c^T = v^T
    let mut m: Vec<Vec<BigRational>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| BigRational::from(basis.rows[j][i].clone()))
                .chain(std::iter::once(BigRational::from(v[i].clone())))
                .collect()
        })
        .collect();
    // Gaussian elimination with partial (first nonzero) pivoting
    let mut row = 0;
    for col in 0..dim {
        let Some(p) = (row..dim).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let pivot = m[row][col].clone();
        for r in 0..dim {
            if r == row || m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pivot;
            for c in col..=dim {
                let sub = &factor * &m[row][c];
                m[r][c] -= sub;
            }
        }
        row += 1;
        if row == dim {
            break;
        }
    }
    // basis rows are independent, so the system has a unique solution
    let mut coeffs = vec![BigRational::zero(); dim];
    let mut r = 0;
    for col in 0..dim {
        if r < dim && !m[r][col].is_zero() {
            coeffs[col] = &m[r][dim] / &m[r][col];
            r += 1;
        }
    }
    Ok(coeffs.iter().all(|c| c.is_integer()))
}

fn det_bareiss(rows: &[Vec<BigInt>]) -> BigInt {
    let n = rows.len();
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigInt::zero();
        };
        if p != col {
            m.swap(p, col);
            sign = -sign;
        }
        for r in col + 1..n {
            for c in col + 1..n {
                let num = &m[r][c] * &m[col][col] - &m[r][col] * &m[col][c];
                m[r][c] = num.div_floor(&prev);
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[col][col].clone();
    }
    sign * prev
}

/// Serializes to the bracketed interchange format:
/// `[[r00 r01 ...]\n[r10 ...]\n...]`.
pub fn serialize_matrix(rows: &[Vec<BigInt>]) -> String {
    let mut out = String::from("[");
    for row in rows {
        out.push('[');
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&v.to_string());
        }
        out.push_str("]\n");
    }
    out.push(']');
    out
}

/// Parses the bracketed format; whitespace and newlines between tokens
/// are ignored.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<BigInt>>, Error> {
    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    let mut current: Option<Vec<BigInt>> = None;
    let mut depth = 0;
    let mut token = String::new();
    let flush = |current: &mut Option<Vec<BigInt>>, token: &mut String| -> Result<(), Error> {
        if token.is_empty() {
            return Ok(());
        }
        let value: BigInt = token
            .parse()
            .map_err(|_| Error::Parameter(format!("bad matrix entry '{token}'")))?;
        current
            .as_mut()
            .ok_or_else(|| Error::Parameter("matrix entry outside a row".into()))?
            .push(value);
        token.clear();
        Ok(())
    };
    for ch in text.chars() {
        match ch {
            '[' => {
                depth += 1;
                if depth == 2 {
                    current = Some(Vec::new());
                } else if depth > 2 {
                    return Err(Error::Parameter("matrix nesting too deep".into()));
                }
            }
            ']' => {
                flush(&mut current, &mut token)?;
                if depth == 2 {
                    rows.push(current.take().unwrap());
                }
                depth -= 1;
            }
            c if c.is_whitespace() || c == ',' => flush(&mut current, &mut token)?,
            c => token.push(c),
        }
    }
    if depth != 0 {
        return Err(Error::Parameter("unbalanced brackets in matrix text".into()));
    }
    if rows.is_empty() {
        return Err(Error::Parameter("empty matrix".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parameter("ragged matrix rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knapsack::{build_system, brute_force_solve, LeakProfile};
    use crate::ntru::{encrypt_random, keygen, NtruParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn small_system(seed: u64, n: usize, k: usize, q: u64) -> KnapsackSystem {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        KnapsackSystem {
            a: (0..k)
                .map(|_| (0..n).map(|_| BigInt::from(rng.gen_range(0..q))).collect())
                .collect(),
            t: (0..k).map(|_| BigInt::from(rng.gen_range(0..q))).collect(),
            q,
            column_map: (0..n).collect(),
        }
    }

    #[test]
    fn bk_dimensions_and_det() {
        let sys = small_system(1, 3, 2, 7);
        let scale = ScalingParams::new(BigInt::from(2), BigInt::from(5)).unwrap();
        let b = build_bk(&sys, &scale);
        assert_eq!(b.dim(), 6);
        // det = N1 (N2 q)^k = 2 * 35^2 = 2450
        assert_eq!(b.det_abs(), BigInt::from(2450));
    }

    #[test]
    fn bk_block_readoff() {
        let sys = small_system(2, 4, 3, 97);
        let scale = ScalingParams::new(BigInt::from(1), BigInt::from(9)).unwrap();
        let b = build_bk(&sys, &scale);
        for i in 0..4 {
            for j in 0..3 {
                assert_eq!(b.rows[i][4 + 1 + j], &scale.n2 * &sys.a[j][i]);
            }
        }
        for j in 0..3 {
            assert_eq!(b.rows[4][4 + 1 + j], -(&scale.n2 * &sys.t[j]));
        }
    }

    #[test]
    fn det_matches_formula_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.gen_range(2..5);
            let k = rng.gen_range(1..=n);
            let q = [7u64, 97, 256][rng.gen_range(0..3)];
            let sys = small_system(rng.gen(), n, k, q);
            let scale = ScalingParams::from_exponent(rng.gen_range(1..4), q, 2).unwrap();
            let b = build_bk(&sys, &scale);
            let expected = &scale.n1 * (&scale.n2 * BigInt::from(q)).pow(k as u32);
            assert_eq!(b.det_abs(), expected);
        }
    }

    #[test]
    fn embed_norm() {
        let scale = ScalingParams::new(BigInt::from(3), BigInt::from(10)).unwrap();
        let v = embed_solution(&[0, 0], &scale, 2);
        assert_eq!(v, vec![BigInt::zero(), BigInt::zero(), BigInt::from(3), BigInt::zero(), BigInt::zero()]);
        let norm2: BigInt = v.iter().map(|c| c * c).sum();
        assert_eq!(norm2, BigInt::from(9));
    }

    #[test]
    fn rows_are_lattice_points() {
        let sys = small_system(4, 3, 2, 7);
        let scale = ScalingParams::new(BigInt::from(1), BigInt::from(8)).unwrap();
        let b = build_bk(&sys, &scale);
        for row in &b.rows {
            assert!(is_lattice_point(&b, row).unwrap());
        }
        // last coordinate of any lattice point is a multiple of N2 q = 56
        let mut probe = vec![BigInt::zero(); b.dim()];
        probe[b.dim() - 1] = BigInt::one();
        assert!(!is_lattice_point(&b, &probe).unwrap());
    }

    #[test]
    fn membership_iff_solution() {
        // Lemma-style check: brute-force solutions embed into the lattice,
        // non-solutions do not.
        let sys = small_system(5, 4, 2, 7);
        let scale = ScalingParams::new(BigInt::from(1), BigInt::from(50)).unwrap();
        let b = build_bk(&sys, &scale);
        let sols = brute_force_solve(&sys, 16).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for x in &sols {
            // embedded solution plus the row cancelling the residual:
            // (x, N1, 0_k) is in L since A x = T - qR
            let v = embed_solution(x, &scale, sys.rows());
            assert!(is_lattice_point(&b, &v).unwrap(), "solution {x:?} not embedded");
        }
        let mut checked = 0;
        while checked < 20 {
            let x: Vec<i8> = (0..4).map(|_| rng.gen_range(-1i8..=1)).collect();
            if sols.contains(&x) {
                continue;
            }
            let v = embed_solution(&x, &scale, sys.rows());
            assert!(!is_lattice_point(&b, &v).unwrap(), "non-solution {x:?} embedded");
            checked += 1;
        }
    }

    #[test]
    fn true_nonce_embeds_into_attack_lattice() {
        let params = NtruParams::by_name("toy61").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let keys = keygen(&params, &mut rng).unwrap();
        let ct = encrypt_random(&keys.h, &params, &mut rng).unwrap();
        let mut leak = LeakProfile::default();
        for i in 0..5 {
            leak.known_m.insert(i, ct.plaintext.coeff(i));
        }
        let sys = build_system(&ct.c, &keys.h, &leak).unwrap();
        let scale = ScalingParams::from_exponent(1, params.q, 1).unwrap();
        let b = build_bk(&sys, &scale);
        let v = embed_solution(ct.nonce.coeffs(), &scale, sys.rows());
        assert!(is_lattice_point(&b, &v).unwrap());
    }

    #[test]
    fn matrix_text_roundtrip() {
        let rows = vec![
            vec![BigInt::from(1), BigInt::from(-22), BigInt::from(3)],
            vec![BigInt::from(400), BigInt::from(5), BigInt::from(-6)],
        ];
        let text = serialize_matrix(&rows);
        assert_eq!(parse_matrix(&text).unwrap(), rows);
        // newline/comma tolerant
        let alt = "[[1, -22,\n 3]\n\n[400 5 -6]]";
        assert_eq!(parse_matrix(alt).unwrap(), rows);
        assert!(parse_matrix("[[1 2][3]]").is_err());
        assert!(parse_matrix("[[1 2").is_err());
    }
}
