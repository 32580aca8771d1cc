//! Monte Carlo sampling of non-homogeneous renewal paths on a grid.
//!
//! Each path gets its own ChaCha8 stream derived from `(seed, path_index)`, so
//! estimates are identical whatever the thread count. Counts are accumulated as
//! integers, which keeps the parallel reduction exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::fmt_sig17;
use crate::grid::{MatrixKind, TwoTimeMatrix};

pub const RNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_paths: u64,
    pub seed: u64,
    pub start_idx: usize,
    pub horizon_idx: usize,
}

impl SimConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
        }
        if self.horizon_idx >= n_points {
            return Err(Error::OutOfRange {
                index: self.horizon_idx,
                n_points,
            });
        }
        if self.start_idx > self.horizon_idx {
            return Err(Error::LowerTriangle {
                s: self.start_idx,
                t: self.horizon_idx,
            });
        }
        Ok(())
    }
}

/// Generator for path `path_index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Renewal indices in `(start_idx, horizon_idx]`, strictly increasing.
///
/// The next renewal after `s` is the first `x > s` with `u < F(s, x)` for a fresh
/// uniform `u`. When `u` is at least `F(s, horizon)` the path stops.
pub fn sample_path<R: Rng + ?Sized>(
    df: &TwoTimeMatrix,
    start_idx: usize,
    horizon_idx: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(start_idx <= horizon_idx && horizon_idx < df.n_points());
    let mut path = Vec::new();
    let mut current = start_idx;
    while current < horizon_idx {
        let u: f64 = rng.random();
        let row = df.row(current);
        let reach = horizon_idx - current;
        match row[1..=reach].iter().position(|&f| u < f) {
            Some(j) => {
                current += j + 1;
                path.push(current);
            }
            None => break,
        }
    }
    path
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalEstimate {
    pub config: SimConfig,
    /// `mean[i]` estimates `H(start, start + i)`.
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `final_counts[n]` = number of paths with exactly `n` renewals by the horizon.
    pub final_counts: Vec<u64>,
}

impl RenewalEstimate {
    pub fn rng_name(&self) -> &'static str {
        RNG_NAME
    }

    pub fn at(&self, t_idx: usize) -> (f64, f64) {
        let i = t_idx - self.config.start_idx;
        (self.mean[i], self.std_err[i])
    }

    /// Empirical pmf of `N(horizon) - N(start)` with the binomial standard error per cell.
    pub fn empirical_pmf(&self) -> Vec<(f64, f64)> {
        let n = self.config.n_paths as f64;
        self.final_counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                (p, (p * (1.0 - p) / n).sqrt())
            })
            .collect()
    }

    pub fn to_tsv_string(&self, df: &TwoTimeMatrix) -> String {
        let grid = df.grid();
        let mut out = format!("# grid {grid} kind={}\n", MatrixKind::Renewal);
        out.push_str(&format!(
            "# simulate seed={} n_paths={} rng={} start={} horizon={}\n",
            self.config.seed, self.config.n_paths, RNG_NAME, self.config.start_idx, self.config.horizon_idx
        ));
        out.push_str("t_idx\ttime\tmean\tstd_err\n");
        for (i, (m, se)) in self.mean.iter().zip(&self.std_err).enumerate() {
            let t = self.config.start_idx + i;
            out.push_str(&format!(
                "{t}\t{}\t{}\t{}\n",
                fmt_sig17(grid.time_of(t)),
                fmt_sig17(*m),
                fmt_sig17(*se)
            ));
        }
        out
    }
}

#[derive(Clone)]
struct Tally {
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
    finals: Vec<u64>,
}

impl Tally {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0; len],
            sum_sq: vec![0; len],
            finals: Vec::new(),
        }
    }

    fn record(&mut self, start: usize, path: &[usize]) {
        let mut k = 0usize;
        for i in 0..self.sum.len() {
            while k < path.len() && path[k] <= start + i {
                k += 1;
            }
            self.sum[i] += k as u64;
            self.sum_sq[i] += (k * k) as u128;
        }
        if self.finals.len() <= k {
            self.finals.resize(k + 1, 0);
        }
        self.finals[k] += 1;
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
        if self.finals.len() < other.finals.len() {
            self.finals.resize(other.finals.len(), 0);
        }
        for (a, b) in self.finals.iter_mut().zip(other.finals) {
            *a += b;
        }
        self
    }
}

/// Mean renewal counts `H(start, t)` for every `t` up to the horizon.
pub fn estimate_renewal_function(df: &TwoTimeMatrix, cfg: &SimConfig) -> Result<RenewalEstimate> {
    cfg.validate(df.n_points())?;
    let len = cfg.horizon_idx - cfg.start_idx + 1;
    let tally = (0..cfg.n_paths)
        .into_par_iter()
        .fold(
            || Tally::new(len),
            |mut acc, i| {
                let mut rng = path_rng(cfg.seed, i);
                let path = sample_path(df, cfg.start_idx, cfg.horizon_idx, &mut rng);
                acc.record(cfg.start_idx, &path);
                acc
            },
        )
        .reduce(|| Tally::new(len), Tally::merge);

    let n = cfg.n_paths as u128;
    let mut mean = Vec::with_capacity(len);
    let mut std_err = Vec::with_capacity(len);
    for i in 0..len {
        let s = tally.sum[i] as u128;
        mean.push(s as f64 / n as f64);
        let se = if n > 1 {
            // exact integer numerator of the unbiased variance
            let num = n * tally.sum_sq[i] - s * s;
            let var = num as f64 / (n * (n - 1)) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        std_err.push(se);
    }
    Ok(RenewalEstimate {
        config: *cfg,
        mean,
        std_err,
        final_counts: tally.finals,
    })
}

/// Random distribution matrix: each row puts mass `m ~ U(min_mass, 1)` on
/// `t > s` with random weights, some of them zero. `min_mass = 1` gives proper rows.
pub fn random_distribution<R: Rng + ?Sized>(
    grid: crate::grid::TimeGrid,
    min_mass: f64,
    rng: &mut R,
) -> TwoTimeMatrix {
    let n = grid.n_points();
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let len = n - s;
        let mut weights: Vec<f64> = (1..len)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mass = if min_mass >= 1.0 {
            1.0
        } else {
            min_mass + (1.0 - min_mass) * rng.random::<f64>()
        };
        if total > 0.0 {
            for w in &mut weights {
                *w *= mass / total;
            }
        }
        let mut row = Vec::with_capacity(len);
        row.push(0.0);
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            row.push(acc.min(1.0));
        }
        rows.push(row);
    }
    TwoTimeMatrix::from_rows(grid, MatrixKind::Distribution, rows).expect("rows follow the grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    fn unit_steps(n: usize) -> TwoTimeMatrix {
        TwoTimeMatrix::from_fn(TimeGrid::unit(n).unwrap(), MatrixKind::Distribution, |s, t| {
            if t > s {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn deterministic_unit_steps() {
        let f = unit_steps(8);
        let mut rng = path_rng(1, 0);
        for _ in 0..50 {
            assert_eq!(sample_path(&f, 0, 5, &mut rng), vec![1, 2, 3, 4, 5]);
        }
        let est = estimate_renewal_function(
            &f,
            &SimConfig {
                n_paths: 1000,
                seed: 3,
                start_idx: 0,
                horizon_idx: 7,
            },
        )
        .unwrap();
        for t in 0..=7 {
            assert_eq!(est.at(t), (t as f64, 0.0));
        }
    }

    #[test]
    fn zero_df_gives_empty_paths() {
        let f = TwoTimeMatrix::zeros(TimeGrid::unit(6).unwrap(), MatrixKind::Distribution);
        let mut rng = path_rng(9, 4);
        for _ in 0..100 {
            assert!(sample_path(&f, 1, 5, &mut rng).is_empty());
        }
    }

    #[test]
    fn paths_are_strictly_increasing_within_window() {
        let mut rng = path_rng(11, 0);
        let f = random_distribution(TimeGrid::unit(20).unwrap(), 0.5, &mut rng);
        for i in 0..2000 {
            let mut r = path_rng(12, i);
            let p = sample_path(&f, 3, 17, &mut r);
            assert!(p.windows(2).all(|w| w[0] < w[1]));
            assert!(p.iter().all(|&x| x > 3 && x <= 17));
        }
    }

    #[test]
    fn same_seed_same_estimate() {
        let mut rng = path_rng(5, 0);
        let f = random_distribution(TimeGrid::unit(12).unwrap(), 0.3, &mut rng);
        let cfg = SimConfig {
            n_paths: 5000,
            seed: 42,
            start_idx: 2,
            horizon_idx: 11,
        };
        let a = estimate_renewal_function(&f, &cfg).unwrap();
        let b = estimate_renewal_function(&f, &cfg).unwrap();
        assert_eq!(a, b);
        let c = estimate_renewal_function(&f, &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.mean, c.mean);
        assert_eq!(a.final_counts.iter().sum::<u64>(), 5000);
    }

    #[test]
    fn config_validation() {
        let f = unit_steps(5);
        let bad = |n_paths, start_idx, horizon_idx| {
            estimate_renewal_function(
                &f,
                &SimConfig {
                    n_paths,
                    seed: 0,
                    start_idx,
                    horizon_idx,
                },
            )
            .is_err()
        };
        assert!(bad(0, 0, 4));
        assert!(bad(10, 3, 2));
        assert!(bad(10, 0, 5));
        assert!(!bad(10, 4, 4));
    }

    #[test]
    fn random_distribution_is_valid() {
        let mut rng = path_rng(0, 0);
        for min_mass in [0.0, 0.5, 1.0] {
            let f = random_distribution(TimeGrid::unit(15).unwrap(), min_mass, &mut rng);
            f.validate().unwrap();
            if min_mass >= 1.0 {
                for s in 0..14 {
                    assert!((f.get(s, 14) - 1.0).abs() < 1e-12 || f.get(s, 14) == 0.0);
                }
            }
        }
    }

    #[test]
    fn tsv_carries_metadata() {
        let f = unit_steps(4);
        let cfg = SimConfig {
            n_paths: 10,
            seed: 7,
            start_idx: 0,
            horizon_idx: 3,
        };
        let est = estimate_renewal_function(&f, &cfg).unwrap();
        let text = est.to_tsv_string(&f);
        assert!(text.contains("seed=7 n_paths=10 rng=chacha8"));
        assert_eq!(text.lines().count(), 3 + 4);
    }
}
