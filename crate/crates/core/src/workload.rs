//! Task-type pools, arrival streams and locality-dependent service times.
//!
//! Every source of randomness draws from its own ChaCha stream derived from
//! one master seed (see [`Stream`]), so e.g. a policy that samples servers
//! never shifts the arrival sequence.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cluster::{LocalityClass, RateProfile, RateVector, TaskType, Topology};
use crate::error::{invalid, Error, Result};

/// Named sub-streams of the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Pool = 1,
    Arrivals = 2,
    Service = 3,
    Policy = 4,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Slotted,
    Continuous,
}

/// How popularity is spread over the types of a pool.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
pub enum Popularity {
    Uniform,
    /// Weight `1 / rank^s`, ranks following draw order.
    Zipf {
        s: f64,
    },
}

/// Which servers may hold replicas of pool types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PoolScope {
    #[default]
    All,
    /// Every replica on servers of one rack; a skewed, non-uniform scenario.
    Hotspot { rack: usize },
}

/// A sampled subset of task types with a popularity vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TypePool {
    pub types: Vec<TaskType>,
    pub popularity: Vec<f64>,
}

impl TypePool {
    pub fn new(types: Vec<TaskType>, popularity: Vec<f64>) -> Result<Self> {
        if types.len() != popularity.len() || types.is_empty() {
            return Err(invalid("pool needs one popularity weight per type"));
        }
        let sum: f64 = popularity.iter().sum();
        if popularity.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || sum <= 0.0 {
            return Err(invalid("popularity weights must be non-negative with a positive sum"));
        }
        let popularity = popularity.into_iter().map(|p| p / sum).collect();
        Ok(Self { types, popularity })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Popularity as a rate shape (total rate 1).
    pub fn shape(&self) -> RateVector {
        RateVector::new(
            self.types
                .iter()
                .cloned()
                .zip(self.popularity.iter().copied())
                .collect(),
        )
        .expect("pool types are distinct")
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Draws `size` distinct types uniformly without replacement.
pub fn sample_type_pool(
    topology: &Topology,
    size: usize,
    replication: usize,
    popularity: Popularity,
    scope: PoolScope,
    seed: u64,
) -> Result<TypePool> {
    if replication == 0 {
        return Err(invalid("replication factor must be at least 1"));
    }
    if size == 0 {
        return Err(invalid("pool size must be at least 1"));
    }
    let servers: Vec<usize> = match scope {
        PoolScope::All => (1..=topology.servers()).collect(),
        PoolScope::Hotspot { rack } => {
            if rack == 0 || rack > topology.racks() {
                return Err(invalid(format!("hotspot rack {rack} outside 1..={}", topology.racks())));
            }
            topology.rack_members(rack).collect()
        }
    };
    let universe = binomial(servers.len(), replication);
    if size as u128 > universe {
        return Err(invalid(format!(
            "pool size {size} exceeds the {universe} available types"
        )));
    }
    if let Popularity::Zipf { s } = popularity {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid("zipf exponent must be positive"));
        }
    }

    let mut rng = stream_rng(seed, Stream::Pool);
    let types = if universe <= 1 << 20 && (size as u128) * 2 > universe {
        let all = combinations(&servers, replication);
        index::sample(&mut rng, all.len(), size)
            .into_iter()
            .map(|i| all[i].clone())
            .collect()
    } else {
        let mut seen = HashSet::with_capacity(size);
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            let mut locals: Vec<usize> = index::sample(&mut rng, servers.len(), replication)
                .into_iter()
                .map(|i| servers[i])
                .collect();
            locals.sort_unstable();
            let t = TaskType::new(locals)?;
            if seen.insert(t.clone()) {
                out.push(t);
            }
        }
        out
    };

    let weights = match popularity {
        Popularity::Uniform => vec![1.0; size],
        Popularity::Zipf { s } => (1..=size).map(|r| (r as f64).powf(-s)).collect(),
    };
    TypePool::new(types, weights)
}

fn combinations(servers: &[usize], r: usize) -> Vec<TaskType> {
    let n = servers.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(TaskType::new(idx.iter().map(|&i| servers[i])).expect("sorted"));
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 && idx[0] == n - r {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// One map task. `kind` indexes into the run's type table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Task {
    pub id: u64,
    pub kind: u32,
    pub arrival: f64,
}

/// Reproducible arrival stream over a fixed set of types.
///
/// Slotted mode draws a Poisson count per slot; continuous mode superposes
/// independent Poisson processes. Both split the total by per-type rate,
/// which is the same as drawing each type independently.
#[derive(Clone, Debug)]
pub struct ArrivalProcess {
    mode: TimeMode,
    total: f64,
    chooser: Option<WeightedIndex<f64>>,
    rng: ChaCha8Rng,
    next_id: u64,
    clock: f64,
    slot_left: u64,
    peeked: Option<Task>,
}

impl ArrivalProcess {
    pub fn new(mode: TimeMode, rates: &[f64], seed: u64) -> Result<Self> {
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("arrival rates must be finite and non-negative"));
        }
        let total: f64 = rates.iter().sum();
        let chooser = if total > 0.0 {
            Some(WeightedIndex::new(rates).map_err(|e| invalid(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            mode,
            total,
            chooser,
            rng: stream_rng(seed, Stream::Arrivals),
            next_id: 0,
            clock: match mode {
                TimeMode::Slotted => -1.0,
                TimeMode::Continuous => 0.0,
            },
            slot_left: 0,
            peeked: None,
        })
    }

    pub fn mode(&self) -> TimeMode {
        self.mode
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    /// Next task in (time, id) order; `None` only when every rate is zero.
    pub fn next_task(&mut self) -> Option<Task> {
        if let Some(t) = self.peeked.take() {
            return Some(t);
        }
        let chooser = self.chooser.as_ref()?;
        match self.mode {
            TimeMode::Continuous => {
                let gap: f64 = Exp::new(self.total).expect("positive rate").sample(&mut self.rng);
                self.clock += gap;
            }
            TimeMode::Slotted => {
                let poisson = Poisson::new(self.total).expect("positive rate");
                while self.slot_left == 0 {
                    self.clock += 1.0;
                    self.slot_left = poisson.sample(&mut self.rng) as u64;
                }
                self.slot_left -= 1;
            }
        }
        let kind = chooser.sample(&mut self.rng) as u32;
        let task = Task {
            id: self.next_id,
            kind,
            arrival: self.clock,
        };
        self.next_id += 1;
        Some(task)
    }

    /// Every arrival with time `<= up_to` not yet returned.
    pub fn next_arrivals(&mut self, up_to: f64) -> Vec<Task> {
        let mut out = Vec::new();
        while let Some(t) = self.next_task() {
            if t.arrival > up_to {
                self.peeked = Some(t);
                break;
            }
            out.push(t);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceFamily {
    Geometric,
    Exponential,
    /// Log-normal with the class mean and coefficient of variation `cv`
    /// (2 when omitted from a config).
    LogNormal {
        #[serde(default = "default_cv")]
        cv: f64,
    },
}

fn default_cv() -> f64 {
    2.0
}

impl ServiceFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Geometric => "geometric",
            Self::Exponential => "exponential",
            Self::LogNormal { .. } => "lognormal",
        }
    }
}

#[derive(Clone, Debug)]
enum ClassDist {
    Geometric(Geometric),
    Exponential(Exp<f64>),
    LogNormal(LogNormal<f64>),
}

/// Service-time sampler with mean `1 / rate(class)` in every family.
#[derive(Clone, Debug)]
pub struct ServiceModel {
    family: ServiceFamily,
    rates: RateProfile,
    dists: [ClassDist; 3],
}

impl ServiceModel {
    pub fn new(family: ServiceFamily, rates: RateProfile, mode: TimeMode) -> Result<Self> {
        rates.validate()?;
        let dist = |rate: f64| -> Result<ClassDist> {
            Ok(match family {
                ServiceFamily::Geometric => {
                    if mode != TimeMode::Slotted {
                        return Err(Error::InvalidConfig(
                            "geometric service is only defined in slotted mode".into(),
                        ));
                    }
                    ClassDist::Geometric(Geometric::new(rate).map_err(|e| Error::InvalidConfig(e.to_string()))?)
                }
                ServiceFamily::Exponential => {
                    ClassDist::Exponential(Exp::new(rate).map_err(|e| Error::InvalidConfig(e.to_string()))?)
                }
                ServiceFamily::LogNormal { cv } => {
                    if !(cv > 0.0 && cv.is_finite()) {
                        return Err(Error::InvalidConfig("log-normal cv must be positive".into()));
                    }
                    let (mu, sigma) = lognormal_params(1.0 / rate, cv);
                    ClassDist::LogNormal(LogNormal::new(mu, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?)
                }
            })
        };
        if family == ServiceFamily::Geometric {
            rates
                .validate_probabilities()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        let dists = [dist(rates.alpha)?, dist(rates.beta)?, dist(rates.gamma)?];
        Ok(Self { family, rates, dists })
    }

    pub fn family(&self) -> ServiceFamily {
        self.family
    }

    pub fn mean(&self, class: LocalityClass) -> f64 {
        1.0 / self.rates.rate(class)
    }

    pub fn sample<R: Rng + ?Sized>(&self, class: LocalityClass, rng: &mut R) -> f64 {
        match &self.dists[class.index()] {
            ClassDist::Geometric(g) => (g.sample(rng) + 1) as f64,
            ClassDist::Exponential(e) => loop {
                // Exp can return 0 with vanishing probability.
                let x = e.sample(rng);
                if x > 0.0 {
                    break x;
                }
            },
            ClassDist::LogNormal(l) => l.sample(rng),
        }
    }
}

/// `(μ, σ)` of the underlying normal for a log-normal with given mean and cv.
pub fn lognormal_params(mean: f64, cv: f64) -> (f64, f64) {
    let sigma2 = (1.0 + cv * cv).ln();
    (mean.ln() - sigma2 / 2.0, sigma2.sqrt())
}
