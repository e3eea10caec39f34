//! Cryptanalysis toolkit for a knapsack/lattice message-recovery attack
//! on NTRU-HPS under partial plaintext (and optionally nonce) leakage.
//!
//! Pipeline: a ciphertext with `k` known plaintext coefficients yields a
//! modular knapsack system over the circulant matrix of the public key
//! ([`knapsack`]); the system is embedded into an integer lattice basis
//! ([`lattice`]); lattice reduction ([`reduction`]) surfaces the ternary
//! nonce, which the candidate scan ([`attack`]) extracts and verifies;
//! the plaintext follows by one ring operation. [`snf`] validates the
//! structural zero-block theorem behind the embedding, and [`harness`]
//! drives seeded batch experiments.

pub mod attack;
pub mod error;
pub mod harness;
pub mod knapsack;
pub mod lattice;
pub mod ntru;
pub mod poly;
pub mod reduction;
pub mod snf;

pub use error::Error;
