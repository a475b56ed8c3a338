use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Dirichlet, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::{self, TAG_DATA};
use crate::{Error, Result};

/// Labelled samples stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn label_histogram(&self, classes: usize) -> Vec<usize> {
        let mut h = vec![0; classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPartition {
    pub clients: Vec<Dataset>,
    pub test: Dataset,
    pub classes: usize,
    pub skew: f64,
    /// Dirichlet concentration used for the label allocation.
    pub alpha: f64,
}

impl DataPartition {
    pub fn client_sizes(&self) -> Vec<usize> {
        self.clients.iter().map(Dataset::len).collect()
    }
}

pub fn dirichlet_alpha(skew: f64) -> f64 {
    (1.0 - skew) * 10.0 + skew * 0.1
}

/// Gaussian mixture parameters shared by every client and the test set.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub feature_dim: usize,
    /// One mean per class, row-major.
    pub means: Vec<f64>,
}

impl Mixture {
    /// Class means on random directions at distance `separation`.
    pub fn random<R: Rng + ?Sized>(classes: usize, feature_dim: usize, separation: f64, rng: &mut R) -> Self {
        let mut means = Vec::with_capacity(classes * feature_dim);
        for _ in 0..classes {
            let dir: Vec<f64> = (0..feature_dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            means.extend(dir.iter().map(|x| x / norm * separation));
        }
        Self { feature_dim, means }
    }

    pub fn sample<R: Rng + ?Sized>(&self, labels: Vec<usize>, rng: &mut R) -> Dataset {
        let f = self.feature_dim;
        let mut features = Vec::with_capacity(labels.len() * f);
        for &l in &labels {
            let mean = &self.means[l * f..(l + 1) * f];
            features.extend(mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
        }
        Dataset {
            feature_dim: f,
            features,
            labels,
        }
    }
}

/// Synthetic non-IID partition. Each client draws label proportions from
/// `Dirichlet(alpha)` with `alpha = (1 - skew)·10 + skew·0.1`, then
/// `samples_per_client` labels from those proportions. The test set is
/// balanced with `test_per_class` samples per class.
pub fn make_partition(
    n_clients: usize,
    classes: usize,
    feature_dim: usize,
    samples_per_client: usize,
    test_per_class: usize,
    separation: f64,
    skew: f64,
    seed: u64,
) -> Result<DataPartition> {
    if n_clients < 2 {
        return Err(Error::Config("n_clients must be at least 2".into()));
    }
    if classes < 2 {
        return Err(Error::Config("classes must be at least 2".into()));
    }
    if samples_per_client == 0 || test_per_class == 0 || feature_dim == 0 {
        return Err(Error::Config("sample counts and feature_dim must be positive".into()));
    }
    if !(0.0..=1.0).contains(&skew) {
        return Err(Error::Probability { name: "skew", value: skew });
    }
    let mut rng = seed::stream(seed, &[TAG_DATA]);
    let mixture = Mixture::random(classes, feature_dim, separation, &mut rng);
    let alpha = dirichlet_alpha(skew);
    let dirichlet = Dirichlet::new_with_size(alpha, classes).expect("alpha > 0, classes >= 2");
    let clients = (0..n_clients)
        .map(|_| {
            let props: Vec<f64> = dirichlet.sample(&mut rng);
            let labels = match WeightedIndex::new(&props) {
                Ok(idx) => (0..samples_per_client).map(|_| idx.sample(&mut rng)).collect(),
                // All mass underflowed; fall back to the largest component.
                Err(_) => vec![argmax(&props); samples_per_client],
            };
            mixture.sample(labels, &mut rng)
        })
        .collect();
    let test_labels = (0..classes).flat_map(|c| std::iter::repeat(c).take(test_per_class)).collect();
    let test = mixture.sample(test_labels, &mut rng);
    Ok(DataPartition {
        clients,
        test,
        classes,
        skew,
        alpha,
    })
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}
