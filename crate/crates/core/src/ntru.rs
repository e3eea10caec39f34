//! Textbook NTRU-HPS key generation, encryption and decryption, used to
//! generate attack instances.
//!
//! Sample spaces follow the scheme description: f from T_{N-2} of any
//! weight, g and m from T_{N-2}(d,d) with d = q/16 - 1, r from T_{N-2}.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::poly::{
    centerlift, conv_mod, invert_poly, sample_fixed_weight, sample_ternary, ModPoly, TernaryPoly,
};

/// Public parameters (N, q, d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NtruParams {
    pub n: usize,
    pub q: u64,
    pub d: usize,
}

impl NtruParams {
    pub fn new(n: usize, q: u64, d: usize) -> Result<Self, Error> {
        if !is_prime(n as u64) {
            return Err(Error::Parameter(format!("N = {n} must be prime")));
        }
        if !q.is_power_of_two() {
            return Err(Error::Parameter(format!("q = {q} must be a power of two")));
        }
        if q % 3 == 0 || n as u64 % 2 == 0 {
            return Err(Error::Parameter("gcd(q,N) = gcd(3,q) = 1 required".into()));
        }
        if 2 * d > n - 1 {
            return Err(Error::Parameter(format!(
                "fixed weight 2d = {} exceeds N-1 = {}",
                2 * d,
                n - 1
            )));
        }
        // decryption-correctness margin: |f*m + 3*f*r*h| coefficients stay
        // below q/2 when 3*2d + 2d < q/2
        if (6 * d + 2 * d) as u64 >= q / 2 {
            return Err(Error::Parameter(format!(
                "correctness margin violated: 8d = {} >= q/2 = {}",
                8 * d,
                q / 2
            )));
        }
        Ok(Self { n, q, d })
    }

    /// Looks up a registered parameter set by name.
    pub fn by_name(name: &str) -> Result<Self, Error> {
        match name {
            "hps2048509" => Self::new(509, 2048, 127),
            "hps2048677" => Self::new(677, 2048, 127),
            "hps4096821" => Self::new(821, 4096, 255),
            "toy61" => Self::new(61, 256, 15),
            "toy101" => Self::new(101, 512, 31),
            other => Err(Error::Parameter(format!(
                "unknown parameter set '{other}' (known: hps2048509, hps2048677, hps4096821, toy61, toy101)"
            ))),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= n {
        if n % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

/// Private and public key material.
#[derive(Debug, Clone)]
pub struct KeyPair {
    pub f: TernaryPoly,
    pub g: TernaryPoly,
    pub fq: ModPoly,
    pub f3: ModPoly,
    pub h: ModPoly,
}

/// A ciphertext together with the true plaintext and nonce.
///
/// `plaintext` and `nonce` exist so tests and the experiment harness can
/// score outcomes; the attack itself reads only `c` (and leaked entries).
#[derive(Debug, Clone)]
pub struct Ciphertext {
    pub c: ModPoly,
    pub plaintext: TernaryPoly,
    pub nonce: TernaryPoly,
}

/// Generates a key pair, resampling f until it is invertible in both
/// R/q and R/3.
pub fn keygen<R: Rng>(params: &NtruParams, rng: &mut R) -> Result<KeyPair, Error> {
    keygen_with_limit(params, rng, 100)
}

pub fn keygen_with_limit<R: Rng>(
    params: &NtruParams,
    rng: &mut R,
    resample_limit: usize,
) -> Result<KeyPair, Error> {
    for _ in 0..resample_limit {
        let f = sample_ternary(params.n, rng);
        let fq = match invert_poly(&f.to_mod(params.q), params.q) {
            Ok(p) => p,
            Err(Error::NotInvertible) => continue,
            Err(e) => return Err(e),
        };
        let f3 = match invert_poly(&f.to_mod(3), 3) {
            Ok(p) => p,
            Err(Error::NotInvertible) => continue,
            Err(e) => return Err(e),
        };
        let g = sample_fixed_weight(params.n, params.d, params.d, rng)?;
        let h = conv_mod(&fq, &g.to_mod(params.q))?;
        return Ok(KeyPair { f, g, fq, f3, h });
    }
    Err(Error::KeyGeneration(format!(
        "no invertible f found in {resample_limit} attempts"
    )))
}

/// c = 3 r*h + m mod q.
pub fn encrypt(
    h: &ModPoly,
    m: &TernaryPoly,
    r: &TernaryPoly,
    params: &NtruParams,
) -> Result<Ciphertext, Error> {
    if m.weights() != (params.d, params.d) {
        return Err(Error::Parameter(format!(
            "plaintext weight {:?} does not match (d,d) = ({},{})",
            m.weights(),
            params.d,
            params.d
        )));
    }
    let rh = conv_mod(&r.to_mod(params.q), h)?;
    let c = rh.scale(3).add(&m.to_mod(params.q))?;
    Ok(Ciphertext { c, plaintext: m.clone(), nonce: r.clone() })
}

/// Samples a fresh (m, r) pair and encrypts it.
pub fn encrypt_random<R: Rng>(
    h: &ModPoly,
    params: &NtruParams,
    rng: &mut R,
) -> Result<Ciphertext, Error> {
    let m = sample_fixed_weight(params.n, params.d, params.d, rng)?;
    let r = sample_ternary(params.n, rng);
    encrypt(h, &m, &r, params)
}

/// v = f*c mod q, centerlift, then F3 * v' mod 3, centerlifted to ternary.
pub fn decrypt(c: &ModPoly, keys: &KeyPair, params: &NtruParams) -> Result<TernaryPoly, Error> {
    let v = conv_mod(&keys.f.to_mod(params.q), c)?;
    let v_lifted = centerlift(&v);
    let b = conv_mod(&keys.f3, &v_lifted.to_mod(3))?;
    let b_lifted = centerlift(&b);
    // coefficients are now in {-1, 0, 1}
    Ok(b_lifted.as_ternary().expect("centerlift mod 3 is ternary"))
}

/// JSON form of a key pair; coefficient arrays are canonical, mod-q for
/// the mod-q polynomials and mod-3 for the ternary ones.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KeyPairRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: u64,
    pub d: usize,
    pub f: Vec<u64>,
    pub g: Vec<u64>,
    pub fq: Vec<u64>,
    pub f3: Vec<u64>,
    pub h: Vec<u64>,
}

impl KeyPairRecord {
    pub fn from_keys(keys: &KeyPair, params: &NtruParams) -> Self {
        Self {
            n: params.n,
            q: params.q,
            d: params.d,
            f: keys.f.to_mod(3).coeffs().to_vec(),
            g: keys.g.to_mod(3).coeffs().to_vec(),
            fq: keys.fq.coeffs().to_vec(),
            f3: keys.f3.coeffs().to_vec(),
            h: keys.h.coeffs().to_vec(),
        }
    }

    pub fn into_keys(self) -> Result<(KeyPair, NtruParams), Error> {
        let params = NtruParams::new(self.n, self.q, self.d)?;
        let ternary = |v: Vec<u64>| -> Result<TernaryPoly, Error> {
            centerlift(&ModPoly::new(v, 3)?)
                .as_ternary()
                .ok_or_else(|| Error::Parameter("non-ternary coefficients".into()))
        };
        let keys = KeyPair {
            f: ternary(self.f)?,
            g: ternary(self.g)?,
            fq: ModPoly::new(self.fq, self.q)?,
            f3: ModPoly::new(self.f3, 3)?,
            h: ModPoly::new(self.h, self.q)?,
        };
        Ok((keys, params))
    }
}

/// JSON form of a ciphertext (with the test-only plaintext and nonce).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CiphertextRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: u64,
    pub d: usize,
    pub c: Vec<u64>,
    pub m: Vec<u64>,
    pub r: Vec<u64>,
}

impl CiphertextRecord {
    pub fn from_ciphertext(ct: &Ciphertext, params: &NtruParams) -> Self {
        Self {
            n: params.n,
            q: params.q,
            d: params.d,
            c: ct.c.coeffs().to_vec(),
            m: ct.plaintext.to_mod(3).coeffs().to_vec(),
            r: ct.nonce.to_mod(3).coeffs().to_vec(),
        }
    }

    pub fn into_ciphertext(self) -> Result<(Ciphertext, NtruParams), Error> {
        let params = NtruParams::new(self.n, self.q, self.d)?;
        let ternary = |v: Vec<u64>| -> Result<TernaryPoly, Error> {
            centerlift(&ModPoly::new(v, 3)?)
                .as_ternary()
                .ok_or_else(|| Error::Parameter("non-ternary coefficients".into()))
        };
        let ct = Ciphertext {
            c: ModPoly::new(self.c, self.q)?,
            plaintext: ternary(self.m)?,
            nonce: ternary(self.r)?,
        };
        Ok((ct, params))
    }
}
