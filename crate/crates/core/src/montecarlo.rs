//! Seeded substreams and order-stable parallel Monte Carlo reduction.
//!
//! Every estimator takes a [`StreamKey`]. Replicas are cut into fixed-size
//! batches; batch `b` draws from `key.child(b)`, and batch sums are combined
//! in batch order, so results are bit-identical for any worker count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

/// Replicas per work item.
pub const BATCH_SIZE: u64 = 4096;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Position in a tree of deterministic random streams rooted at a user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    root: u64,
    state: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self {
            root: seed,
            state: splitmix64(seed),
        }
    }

    /// Independent child stream number `index`.
    pub fn child(self, index: u64) -> Self {
        Self {
            root: self.root,
            state: splitmix64(self.state ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C908))),
        }
    }

    /// Seed the whole tree was derived from.
    pub fn root_seed(&self) -> u64 {
        self.root
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.state)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            samples: 0,
        }
    }

    fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        if n == 0 {
            return Self::default();
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / nf).sqrt(),
            samples: n,
        }
    }

    /// `|self − other|` in units of the combined standard error.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let se = self.stderr.hypot(other.stderr);
        let diff = (self.mean - other.mean).abs();
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `|self − value|` in units of this estimate's standard error.
    pub fn z_against(&self, value: f64) -> f64 {
        self.z_score(&Estimate::exact(value))
    }
}

/// Per-component sums collected over a batch.
#[derive(Clone, Copy)]
struct Sums<const K: usize> {
    sum: [f64; K],
    sum_sq: [f64; K],
}

/// Runs `replicas` independent draws of a `K`-component observable and returns
/// the per-component mean and standard error.
pub fn parallel_moments<const K: usize, F>(key: StreamKey, replicas: u64, draw: F) -> [Estimate; K]
where
    F: Fn(&mut SimRng) -> [f64; K] + Sync,
{
    let batches = replicas.div_ceil(BATCH_SIZE);
    let partial: Vec<Sums<K>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = key.child(b).rng();
            let count = BATCH_SIZE.min(replicas - b * BATCH_SIZE);
            let mut acc = Sums {
                sum: [0.0; K],
                sum_sq: [0.0; K],
            };
            for _ in 0..count {
                let x = draw(&mut rng);
                for k in 0..K {
                    acc.sum[k] += x[k];
                    acc.sum_sq[k] += x[k] * x[k];
                }
            }
            acc
        })
        .collect();
    let mut total = Sums {
        sum: [0.0; K],
        sum_sq: [0.0; K],
    };
    for p in &partial {
        for k in 0..K {
            total.sum[k] += p.sum[k];
            total.sum_sq[k] += p.sum_sq[k];
        }
    }
    std::array::from_fn(|k| Estimate::from_sums(total.sum[k], total.sum_sq[k], replicas))
}

/// Scalar version of [`parallel_moments`].
pub fn parallel_mean<F>(key: StreamKey, replicas: u64, draw: F) -> Estimate
where
    F: Fn(&mut SimRng) -> f64 + Sync,
{
    parallel_moments::<1, _>(key, replicas, |rng| [draw(rng)])[0]
}

/// Exponential waiting time with the given rate; infinite for rate zero.
#[inline]
pub fn exp_time<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

#[inline]
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p
}

/// `n` sorted uniform points on `[0, t]`.
pub fn sorted_uniforms<R: Rng + ?Sized>(rng: &mut R, n: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random::<f64>() * t));
    out.sort_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_across_thread_counts() {
        let key = StreamKey::new(7);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| parallel_mean(key, 50_000, |r| r.random::<f64>()))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert!(a.z_against(0.5) < 4.0);
    }

    #[test]
    fn children_differ() {
        let k = StreamKey::new(1);
        assert_ne!(k.child(0), k.child(1));
        assert_ne!(k.child(0).child(1), k.child(1).child(0));
        assert_eq!(k.child(3).root_seed(), 1);
    }

    #[test]
    fn exponential_mean() {
        let e = parallel_mean(StreamKey::new(3), 200_000, |r| exp_time(r, 2.0));
        assert!(e.z_against(0.5) < 4.0);
        let mut rng = StreamKey::new(0).rng();
        assert!(exp_time(&mut rng, 0.0).is_infinite());
    }
}
