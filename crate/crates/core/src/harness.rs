//! Batch experiment driver: runs many independent attack trials with
//! per-trial sub-seeds, streams one JSON record per trial, and reports a
//! summary with success rate and mean wall time.
//!
//! Sub-seed derivation: trial i uses splitmix64(master_seed ^ (i+1)), a
//! fixed, documented construction so any trial can be replayed in
//! isolation.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{
    app_value_for, recover_message, recover_message_alt, AttackInstance, AttackStatus, LeakMode,
};
use crate::error::Error;
use crate::knapsack::LeakProfile;
use crate::lattice::ScalingParams;
use crate::ntru::{encrypt_random, keygen, NtruParams};
use crate::reduction::{ExternalReducer, InternalLll, Reducer};

/// Which reduction backend a trial uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducerSpec {
    Internal,
    External { command: String, timeout_secs: u64 },
}

impl ReducerSpec {
    pub fn build(&self) -> Box<dyn Reducer> {
        match self {
            ReducerSpec::Internal => Box::new(InternalLll::default()),
            ReducerSpec::External { command, timeout_secs } => {
                Box::new(ExternalReducer::new(command.clone(), Duration::from_secs(*timeout_secs)))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// named parameter set, e.g. "toy61" or "hps2048509"
    pub params: String,
    pub n1: u64,
    /// scaling exponent: N2 = q^x
    pub x: u32,
    /// number of known plaintext coefficients
    pub k1: usize,
    /// number of known nonce coefficients (0 selects the primary attack)
    pub k2: usize,
    pub leak_mode: LeakMode,
    pub trials: usize,
    pub seed: u64,
    pub reducer: ReducerSpec,
    /// worker threads; 1 runs trials sequentially
    pub workers: usize,
}

impl ExperimentConfig {
    /// Parses a simple `key = value` config file mirroring every field.
    pub fn from_key_values(text: &str) -> Result<Self, Error> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("config line {}: expected key = value", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| Error::Parameter(format!("config missing key '{k}'")))
        };
        let parse_num = |k: &str, v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Parameter(format!("config key '{k}': bad number '{v}'")))
        };
        let reducer = match map.get("reducer").map(String::as_str).unwrap_or("internal") {
            "internal" => ReducerSpec::Internal,
            other => ReducerSpec::External {
                command: other.to_string(),
                timeout_secs: map
                    .get("timeout_secs")
                    .map(|v| parse_num("timeout_secs", v))
                    .transpose()?
                    .unwrap_or(600),
            },
        };
        let leak_mode = match map.get("leak_mode").map(String::as_str).unwrap_or("prefix") {
            "prefix" => LeakMode::Prefix,
            "random" => LeakMode::Random,
            other => {
                return Err(Error::Parameter(format!("config: unknown leak_mode '{other}'")))
            }
        };
        Ok(ExperimentConfig {
            params: get("params")?,
            n1: parse_num("n1", &get("n1")?)?,
            x: parse_num("x", &get("x")?)? as u32,
            k1: parse_num("k1", &get("k1")?)? as usize,
            k2: map
                .get("k2")
                .map(|v| parse_num("k2", v))
                .transpose()?
                .unwrap_or(0) as usize,
            leak_mode,
            trials: parse_num("trials", &get("trials")?)? as usize,
            seed: parse_num("seed", &get("seed")?)?,
            reducer,
            workers: map
                .get("workers")
                .map(|v| parse_num("workers", v))
                .transpose()?
                .unwrap_or(1) as usize,
        })
    }

    /// Leaked fraction of the secret material, in percent.
    pub fn leak_percent(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else if self.k2 == 0 {
            self.k1 as f64 / n as f64 * 100.0
        } else {
            (self.k1 + self.k2) as f64 / (2 * n) as f64 * 100.0
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub status: AttackStatus,
    pub success: bool,
    pub build_ms: u128,
    pub reduce_ms: u128,
    pub extract_ms: u128,
    pub wall_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub params: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_wall_ms: f64,
    pub leak_percent: f64,
    pub seed_derivation: String,
}

/// splitmix64 finalizer; fixed constant sub-seed schedule.
pub fn subseed(master: u64, trial: usize) -> u64 {
    let mut z = master ^ (trial as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn leak_positions(n: usize, k: usize, mode: LeakMode, rng: &mut ChaCha12Rng) -> Vec<usize> {
    match mode {
        LeakMode::Prefix => (0..k).collect(),
        LeakMode::Random => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            all.truncate(k);
            all.sort_unstable();
            all
        }
    }
}

/// Runs one trial end to end from its sub-seed. Public so single trials
/// can be replayed from the CLI.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> TrialRecord {
    let seed = subseed(config.seed, trial);
    let started = Instant::now();
    let result = (|| -> Result<(AttackStatus, bool, u128, u128, u128), Error> {
        let params = NtruParams::by_name(&config.params)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let keys = keygen(&params, &mut rng)?;
        let ct = encrypt_random(&keys.h, &params, &mut rng)?;
        let mut leak = LeakProfile::default();
        for i in leak_positions(params.n, config.k1, config.leak_mode, &mut rng) {
            leak.known_m.insert(i, ct.plaintext.coeff(i));
        }
        for i in leak_positions(params.n, config.k2, config.leak_mode, &mut rng) {
            leak.known_r.insert(i, ct.nonce.coeff(i));
        }
        let instance = AttackInstance { h: keys.h.clone(), c: ct.c.clone(), leak };
        let scale = ScalingParams::from_exponent(config.n1, params.q, config.x)?;
        let reducer = config.reducer.build();
        let app = app_value_for(params.n);
        let outcome = if config.k2 == 0 {
            recover_message(&instance, &params, &scale, app, reducer.as_ref())?
        } else {
            recover_message_alt(&instance, &params, &scale, app, reducer.as_ref())?
        };
        let success = outcome
            .message
            .as_ref()
            .and_then(|m| m.as_ternary())
            .map(|m| m == ct.plaintext)
            .unwrap_or(false);
        Ok((
            outcome.status,
            success,
            outcome.timings.build.as_millis(),
            outcome.timings.reduce.as_millis(),
            outcome.timings.extract.as_millis(),
        ))
    })();
    let wall_ms = started.elapsed().as_millis();
    match result {
        Ok((status, success, build_ms, reduce_ms, extract_ms)) => TrialRecord {
            trial,
            seed,
            status,
            success,
            build_ms,
            reduce_ms,
            extract_ms,
            wall_ms,
            error: None,
        },
        // a failed trial is recorded, never aborts the batch
        Err(e) => TrialRecord {
            trial,
            seed,
            status: AttackStatus::NotFound,
            success: false,
            build_ms: 0,
            reduce_ms: 0,
            extract_ms: 0,
            wall_ms,
            error: Some(e.to_string()),
        },
    }
}

/// Runs the whole batch, writing one JSON line per trial to `out` (plus a
/// leading header line documenting the seed schedule), and returns the
/// summary.
pub fn run_experiment(
    config: &ExperimentConfig,
    out: &mut dyn Write,
) -> Result<ExperimentSummary, Error> {
    // an unknown set name still produces records (each carrying the error)
    let n = NtruParams::by_name(&config.params).map(|p| p.n).unwrap_or(0);
    let derivation = "subseed(i) = splitmix64(master_seed ^ (i+1)*0x9e3779b97f4a7c15)".to_string();
    let header = serde_json::json!({
        "type": "header",
        "config": config,
        "seed_derivation": derivation,
    });
    writeln!(out, "{header}")?;

    let workers = config.workers.max(1).min(config.trials.max(1));
    let mut records: Vec<TrialRecord> = if workers <= 1 {
        (0..config.trials).map(|i| run_trial(config, i)).collect()
    } else {
        let next = Mutex::new(0usize);
        let results = Mutex::new(Vec::with_capacity(config.trials));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = {
                        let mut guard = next.lock().unwrap();
                        if *guard >= config.trials {
                            break;
                        }
                        let i = *guard;
                        *guard += 1;
                        i
                    };
                    let record = run_trial(config, i);
                    results.lock().unwrap().push(record);
                });
            }
        });
        results.into_inner().unwrap()
    };
    records.sort_by_key(|r| r.trial);

    let mut successes = 0;
    let mut wall_total = 0u128;
    for record in &records {
        if record.success {
            successes += 1;
        }
        wall_total += record.wall_ms;
        writeln!(out, "{}", serde_json::to_string(record)?)?;
    }
    let trials = records.len();
    let summary = ExperimentSummary {
        params: config.params.clone(),
        trials,
        successes,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        mean_wall_ms: if trials == 0 {
            0.0
        } else {
            wall_total as f64 / trials as f64
        },
        leak_percent: config.leak_percent(n),
        seed_derivation: derivation,
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&serde_json::json!({ "type": "summary", "summary": summary }))?
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationPoint {
    pub n1: u64,
    pub x: u32,
    pub success_rate: f64,
    pub mean_wall_ms: f64,
}

/// Grid search over (N1, x); maximizes success rate, ties broken by mean
/// runtime. Returns the full grid and the best point.
pub fn calibrate(
    base: &ExperimentConfig,
    n1_values: &[u64],
    x_values: &[u32],
) -> Result<(Vec<CalibrationPoint>, CalibrationPoint), Error> {
    let mut grid = Vec::new();
    for &n1 in n1_values {
        for &x in x_values {
            let mut config = base.clone();
            config.n1 = n1;
            config.x = x;
            let mut sink = std::io::sink();
            let summary = run_experiment(&config, &mut sink)?;
            grid.push(CalibrationPoint {
                n1,
                x,
                success_rate: summary.success_rate,
                mean_wall_ms: summary.mean_wall_ms,
            });
        }
    }
    let best = grid
        .iter()
        .cloned()
        .max_by(|a, b| {
            a.success_rate
                .partial_cmp(&b.success_rate)
                .unwrap()
                .then(b.mean_wall_ms.partial_cmp(&a.mean_wall_ms).unwrap())
        })
        .ok_or_else(|| Error::Parameter("empty calibration grid".into()))?;
    Ok((grid, best))
}
