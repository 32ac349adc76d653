//! Simulation designs: four covariance structures for the covariates, three
//! error laws, and three coefficient patterns over a randomly placed
//! support.

use std::io::Write;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::dataset::{Dataset, ModelSubset};
use crate::error::{Error, Result};

/// Covariance of the covariate rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovCase {
    /// No correlation among covariates.
    Identity,
    /// Support-dependent block structure: common correlation `active` among
    /// support columns, `inactive` among the rest, `cross` between the two
    /// groups. Indefinite for large p; restricted to p <= 500.
    Block {
        active: f64,
        inactive: f64,
        cross: f64,
    },
    /// Constant correlation `rho` between every pair of columns.
    Equicorrelated { rho: f64 },
    /// Stationary AR(1): correlation rho^|i-j|.
    Ar1 { rho: f64 },
}

impl CovCase {
    pub fn block_default() -> Self {
        CovCase::Block {
            active: 0.25,
            inactive: 0.75,
            cross: 0.50,
        }
    }

    pub fn equicorrelated_default() -> Self {
        CovCase::Equicorrelated { rho: 0.5 }
    }

    pub fn ar1_default() -> Self {
        CovCase::Ar1 { rho: 0.9 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CovCase::Identity => "identity",
            CovCase::Block { .. } => "block",
            CovCase::Equicorrelated { .. } => "equicorrelation",
            CovCase::Ar1 { .. } => "ar1",
        }
    }
}

/// Distribution of the error vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorLaw {
    /// i.i.d. N(0, sigma^2); sigma = 0 gives noise-free data.
    Gaussian { sigma: f64 },
    /// Classical multivariate t with 2 degrees of freedom: one chi-square
    /// scale shared by all coordinates of the vector.
    MultivariateT,
    /// Independent t_2 draws per coordinate.
    IidT,
}

impl ErrorLaw {
    pub fn gaussian_unit() -> Self {
        ErrorLaw::Gaussian { sigma: 1.0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ErrorLaw::Gaussian { .. } => "gaussian",
            ErrorLaw::MultivariateT => "mvt2",
            ErrorLaw::IidT => "iidt2",
        }
    }
}

/// Coefficient pattern on the support.
///
/// The decaying and increasing grids start at 2.0 and move in steps of 0.2
/// (supports of up to five columns) or 0.1 (larger supports), downward and
/// upward respectively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPattern {
    Constant(f64),
    Decaying,
    Increasing,
}

impl BetaPattern {
    pub fn label(&self) -> &'static str {
        match self {
            BetaPattern::Constant(_) => "constant",
            BetaPattern::Decaying => "decaying",
            BetaPattern::Increasing => "increasing",
        }
    }

    pub fn values(&self, support_size: usize) -> Vec<f64> {
        let step = if support_size <= 5 { 0.2 } else { 0.1 };
        match self {
            BetaPattern::Constant(b) => vec![*b; support_size],
            BetaPattern::Decaying => (0..support_size)
                .map(|k| 2.0 - step * k as f64)
                .collect(),
            BetaPattern::Increasing => (0..support_size)
                .map(|k| 2.0 + step * k as f64)
                .collect(),
        }
    }
}

/// One data-generating scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub cov_case: CovCase,
    pub error_law: ErrorLaw,
    pub beta_pattern: BetaPattern,
    pub support_size: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Identity covariance, unit Gaussian errors, constant coefficients 2.0,
    /// and the default support size (5 up to p = 500, 10 beyond).
    pub fn new(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            cov_case: CovCase::Identity,
            error_law: ErrorLaw::gaussian_unit(),
            beta_pattern: BetaPattern::Constant(2.0),
            support_size: default_support_size(p),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidConfig("n and p must be positive".into()));
        }
        if self.support_size > self.p {
            return Err(Error::InvalidConfig(format!(
                "support size {} exceeds p={}",
                self.support_size, self.p
            )));
        }
        match self.cov_case {
            CovCase::Block { .. } if self.p > 500 => Err(Error::InvalidConfig(
                "block covariance is indefinite beyond p=500".into(),
            )),
            CovCase::Equicorrelated { rho } if !(0.0..1.0).contains(&rho) => Err(
                Error::InvalidConfig(format!("equicorrelation rho={rho} must be in [0,1)")),
            ),
            CovCase::Ar1 { rho } if rho.abs() >= 1.0 => Err(Error::InvalidConfig(format!(
                "ar1 rho={rho} must satisfy |rho| < 1"
            ))),
            _ => Ok(()),
        }
    }
}

pub fn default_support_size(p: usize) -> usize {
    if p <= 500 {
        5.min(p)
    } else {
        10
    }
}

/// A dataset together with its generating truth.
#[derive(Debug, Clone)]
pub struct GeneratedTruth {
    pub dataset: Dataset,
    pub true_support: ModelSubset,
    pub true_beta: Vec<f64>,
}

/// Reusable sampler for one scenario. For the block covariance, the dense
/// factor is computed once here (in canonical order, support columns first)
/// and reused across replications; per replication, columns are permuted to
/// the drawn support positions.
pub struct ScenarioGenerator {
    spec: ScenarioSpec,
    block_chol: Option<DMatrix<f64>>,
}

impl ScenarioGenerator {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let block_chol = match spec.cov_case {
            CovCase::Block {
                active,
                inactive,
                cross,
            } => {
                let s = spec.support_size;
                let p = spec.p;
                let mut sigma = DMatrix::<f64>::zeros(p, p);
                for i in 0..p {
                    for j in 0..p {
                        sigma[(i, j)] = if i == j {
                            1.0
                        } else {
                            match (i < s, j < s) {
                                (true, true) => active,
                                (false, false) => inactive,
                                _ => cross,
                            }
                        };
                    }
                }
                let chol = nalgebra::Cholesky::new(sigma).ok_or_else(|| {
                    Error::CovarianceNotPositiveDefinite {
                        case: format!(
                            "block dependence (active={active}, inactive={inactive}, cross={cross}, p={p}, support={s})"
                        ),
                    }
                })?;
                Some(chol.unpack())
            }
            _ => None,
        };
        Ok(Self { spec, block_chol })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    /// Draws the covariate columns for a given support placement. Rows are
    /// i.i.d. N(0, Sigma); draws are consumed row by row.
    pub fn sample_covariates(
        &self,
        support: &ModelSubset,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Vec<f64>> {
        let (n, p) = (self.spec.n, self.spec.p);
        let mut cols = vec![vec![0.0; n]; p];
        match self.spec.cov_case {
            CovCase::Identity => {
                for i in 0..n {
                    for col in cols.iter_mut() {
                        col[i] = standard_normal(rng);
                    }
                }
            }
            CovCase::Equicorrelated { rho } => {
                // x_j = sqrt(1-rho) z_j + sqrt(rho) w with one w per row
                // realizes (1-rho) I + rho 11' exactly.
                let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
                for i in 0..n {
                    let w = standard_normal(rng);
                    for col in cols.iter_mut() {
                        col[i] = a * standard_normal(rng) + b * w;
                    }
                }
            }
            CovCase::Ar1 { rho } => {
                let innov = (1.0 - rho * rho).sqrt();
                for i in 0..n {
                    let mut prev = standard_normal(rng);
                    cols[0][i] = prev;
                    for col in cols.iter_mut().skip(1) {
                        prev = rho * prev + innov * standard_normal(rng);
                        col[i] = prev;
                    }
                }
            }
            CovCase::Block { .. } => {
                let l = self.block_chol.as_ref().expect("factor built in new()");
                // The factor is in canonical order (support first); dest maps
                // each canonical position to its actual column index.
                let mut dest = Vec::with_capacity(p);
                dest.extend(support.iter().copied());
                dest.extend((0..p).filter(|j| !support.contains(*j)));
                let mut z = vec![0.0; p];
                for i in 0..n {
                    for zj in z.iter_mut() {
                        *zj = standard_normal(rng);
                    }
                    for k in 0..p {
                        let mut v = 0.0;
                        for t in 0..=k {
                            v += l[(k, t)] * z[t];
                        }
                        cols[dest[k]][i] = v;
                    }
                }
            }
        }
        cols
    }

    /// Draws one dataset: support placement, covariates, errors, and the
    /// response y = X_support beta + e.
    pub fn generate(&self, seed: u64) -> Result<GeneratedTruth> {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let support = ModelSubset::from_unsorted(
            rand::seq::index::sample(&mut rng, spec.p, spec.support_size).into_vec(),
            spec.p,
        )?;
        let cols = self.sample_covariates(&support, &mut rng);
        let e = sample_errors(spec.n, spec.error_law, &mut rng);
        let beta = spec.beta_pattern.values(spec.support_size);

        let mut y = e;
        for (k, &j) in support.iter().enumerate() {
            let b = beta[k];
            for i in 0..spec.n {
                y[i] += b * cols[j][i];
            }
        }
        Ok(GeneratedTruth {
            dataset: Dataset::from_columns(y, cols)?,
            true_support: support,
            true_beta: beta,
        })
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Error vector of length n under the given law.
pub fn sample_errors(n: usize, law: ErrorLaw, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match law {
        ErrorLaw::Gaussian { sigma } => (0..n).map(|_| sigma * standard_normal(rng)).collect(),
        ErrorLaw::MultivariateT => {
            let w: f64 = ChiSquared::new(2.0).unwrap().sample(rng);
            let scale = (2.0 / w).sqrt();
            (0..n).map(|_| scale * standard_normal(rng)).collect()
        }
        ErrorLaw::IidT => {
            let chi = ChiSquared::new(2.0).unwrap();
            (0..n)
                .map(|_| {
                    let z = standard_normal(rng);
                    let w: f64 = chi.sample(rng);
                    z * (2.0 / w).sqrt()
                })
                .collect()
        }
    }
}

/// Convenience wrapper: builds the generator and draws one dataset with the
/// spec's own seed.
pub fn generate_dataset(spec: &ScenarioSpec) -> Result<GeneratedTruth> {
    ScenarioGenerator::new(spec.clone())?.generate(spec.seed)
}

/// Writes a dataset in the same CSV schema the command-line tool ingests:
/// header `y,x1..xp`, one row per observation.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.y()[i].to_string()];
        rec.extend((0..data.p()).map(|j| data.col(j)[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_corr(cols: &[Vec<f64>], a: usize, b: usize) -> f64 {
        let n = cols[a].len() as f64;
        let ma = cols[a].iter().sum::<f64>() / n;
        let mb = cols[b].iter().sum::<f64>() / n;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        let mut sab = 0.0;
        for i in 0..cols[a].len() {
            let da = cols[a][i] - ma;
            let db = cols[b][i] - mb;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
        sab / (saa.sqrt() * sbb.sqrt())
    }

    fn sample(spec: ScenarioSpec, support: &[usize], seed: u64) -> Vec<Vec<f64>> {
        let generator = ScenarioGenerator::new(spec.clone()).unwrap();
        let support = ModelSubset::new(support.to_vec(), spec.p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generator.sample_covariates(&support, &mut rng)
    }

    #[test]
    fn identity_has_near_zero_correlations() {
        let mut spec = ScenarioSpec::new(5000, 10);
        spec.support_size = 5;
        let cols = sample(spec, &[0, 1, 2, 3, 4], 42);
        for a in 0..10 {
            for b in 0..a {
                assert!(empirical_corr(&cols, a, b).abs() < 0.05, "({a},{b})");
            }
        }
    }

    #[test]
    fn ar1_correlations_decay_geometrically() {
        let mut spec = ScenarioSpec::new(5000, 10);
        spec.cov_case = CovCase::ar1_default();
        spec.support_size = 5;
        let cols = sample(spec, &[0, 1, 2, 3, 4], 43);
        for a in 0..10usize {
            for b in 0..a {
                let target = 0.9f64.powi((a - b) as i32);
                let got = empirical_corr(&cols, a, b);
                assert!((got - target).abs() < 0.05, "({a},{b}): {got} vs {target}");
            }
        }
    }

    #[test]
    fn equicorrelation_hits_half() {
        let mut spec = ScenarioSpec::new(5000, 10);
        spec.cov_case = CovCase::equicorrelated_default();
        spec.support_size = 5;
        let cols = sample(spec, &[0, 1, 2, 3, 4], 44);
        for a in 0..10 {
            for b in 0..a {
                let got = empirical_corr(&cols, a, b);
                assert!((got - 0.5).abs() < 0.05, "({a},{b}): {got}");
            }
        }
    }

    #[test]
    fn block_correlations_follow_group_membership() {
        let mut spec = ScenarioSpec::new(5000, 20);
        spec.cov_case = CovCase::block_default();
        spec.support_size = 5;
        // Scattered support: permutation of canonical columns must follow it.
        let support = [2, 7, 11, 13, 19];
        let cols = sample(spec, &support, 45);
        let is_active = |j: usize| support.contains(&j);
        for a in 0..20 {
            for b in 0..a {
                let target = match (is_active(a), is_active(b)) {
                    (true, true) => 0.25,
                    (false, false) => 0.75,
                    _ => 0.50,
                };
                let got = empirical_corr(&cols, a, b);
                assert!((got - target).abs() < 0.05, "({a},{b}): {got} vs {target}");
            }
        }
    }

    #[test]
    fn block_rejects_large_p() {
        let mut spec = ScenarioSpec::new(10, 1000);
        spec.cov_case = CovCase::block_default();
        spec.support_size = 10;
        assert!(matches!(
            ScenarioGenerator::new(spec),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn indefinite_block_fails_factorization() {
        let mut spec = ScenarioSpec::new(10, 100);
        spec.cov_case = CovCase::Block {
            active: 0.0,
            inactive: 0.9,
            cross: 0.9,
        };
        spec.support_size = 5;
        assert!(matches!(
            ScenarioGenerator::new(spec),
            Err(Error::CovarianceNotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn beta_grids_match_documented_values() {
        let dec = BetaPattern::Decaying.values(5);
        for (got, want) in dec.iter().zip([2.0, 1.8, 1.6, 1.4, 1.2]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let ten = BetaPattern::Decaying.values(10);
        assert_eq!(ten.len(), 10);
        assert!((ten[9] - 1.1).abs() < 1e-12);
        let inc = BetaPattern::Increasing.values(5);
        for (got, want) in inc.iter().zip([2.0, 2.2, 2.4, 2.6, 2.8]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(BetaPattern::Constant(2.0).values(3), vec![2.0; 3]);
    }

    #[test]
    fn noise_free_reproduces_linear_combination() {
        let mut spec = ScenarioSpec::new(12, 6);
        spec.error_law = ErrorLaw::Gaussian { sigma: 0.0 };
        spec.support_size = 2;
        spec.seed = 9;
        let truth = generate_dataset(&spec).unwrap();
        for i in 0..12 {
            let mu: f64 = truth
                .true_support
                .iter()
                .enumerate()
                .map(|(k, &j)| truth.true_beta[k] * truth.dataset.col(j)[i])
                .sum();
            assert_eq!(truth.dataset.y()[i], mu);
        }
    }

    #[test]
    fn seeded_generation_is_bit_identical() {
        let mut spec = ScenarioSpec::new(30, 40);
        spec.cov_case = CovCase::ar1_default();
        spec.support_size = 5;
        spec.seed = 77;
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a.dataset.y(), b.dataset.y());
        for j in 0..40 {
            assert_eq!(a.dataset.col(j), b.dataset.col(j));
        }
        assert_eq!(a.true_support, b.true_support);
    }

    #[test]
    fn shared_scale_t_couples_coordinate_magnitudes() {
        // Multivariate t: |e_1| and |e_2| share the chi-square divisor and
        // correlate; independent t coordinates do not.
        let reps = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mv = (Vec::new(), Vec::new());
        for _ in 0..reps {
            let e = sample_errors(2, ErrorLaw::MultivariateT, &mut rng);
            mv.0.push(e[0].abs());
            mv.1.push(e[1].abs());
        }
        let mut iid = (Vec::new(), Vec::new());
        for _ in 0..reps {
            let e = sample_errors(2, ErrorLaw::IidT, &mut rng);
            iid.0.push(e[0].abs());
            iid.1.push(e[1].abs());
        }
        let corr = |xs: &[f64], ys: &[f64]| {
            let cols = vec![xs.to_vec(), ys.to_vec()];
            empirical_corr(&cols, 0, 1)
        };
        assert!(corr(&mv.0, &mv.1) > 0.1);
        assert!(corr(&iid.0, &iid.1).abs() < 0.1);
    }

    #[test]
    fn t2_variance_unstable_but_trimmed_stable() {
        // Second moments do not exist for t_2: across disjoint blocks the
        // raw sample variance swings by large factors while the 1% trimmed
        // variance stays put.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = sample_errors(100_000, ErrorLaw::IidT, &mut rng);
        let var = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
        };
        let trimmed = |xs: &[f64]| {
            let mut v: Vec<f64> = xs.to_vec();
            v.sort_by(|a, b| a.total_cmp(b));
            let k = xs.len() / 100;
            var(&v[k..xs.len() - k])
        };
        let blocks: Vec<&[f64]> = draws.chunks(10_000).collect();
        let spread = |f: &dyn Fn(&[f64]) -> f64| {
            let vals: Vec<f64> = blocks.iter().map(|b| f(b)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0f64, f64::max);
            hi / lo
        };
        let raw_spread = spread(&var);
        let trimmed_spread = spread(&trimmed);
        assert!(raw_spread > 3.0, "raw block-variance spread {raw_spread}");
        assert!(
            trimmed_spread < 1.5,
            "trimmed block-variance spread {trimmed_spread}"
        );
    }

    #[test]
    fn gaussian_variance_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = sample_errors(100_000, ErrorLaw::gaussian_unit(), &mut rng);
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let v = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / draws.len() as f64;
        assert!((0.98..=1.02).contains(&v), "variance {v}");
    }

    #[test]
    fn csv_roundtrip_schema() {
        let mut spec = ScenarioSpec::new(4, 3);
        spec.support_size = 1;
        spec.seed = 2;
        let truth = generate_dataset(&spec).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&truth.dataset, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("y,x1,x2,x3"));
        assert_eq!(lines.count(), 4);
    }
}
