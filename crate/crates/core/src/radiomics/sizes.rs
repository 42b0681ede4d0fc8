//! Shared arithmetic for level-by-size count matrices (runs, zones,
//! dependences).

/// Counts `p(i, j)` for level `i` in `1..=ng` and size `j` in `1..=max_size`,
/// stored row-major with zero-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeMatrix {
    ng: usize,
    max_size: usize,
    counts: Vec<f64>,
}

impl SizeMatrix {
    pub fn new(ng: usize, max_size: usize) -> Self {
        SizeMatrix {
            ng,
            max_size,
            counts: vec![0.0; ng * max_size],
        }
    }

    /// Adds one observation of `level` with `size` (both one-based).
    pub fn add(&mut self, level: u32, size: usize) {
        debug_assert!(level >= 1 && size >= 1 && size <= self.max_size);
        self.counts[(level as usize - 1) * self.max_size + size - 1] += 1.0;
    }

    pub fn get(&self, level: usize, size: usize) -> f64 {
        self.counts[(level - 1) * self.max_size + size - 1]
    }

    pub fn ng(&self) -> usize {
        self.ng
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(k, &c)| ((k / self.max_size + 1) as f64, (k % self.max_size + 1) as f64, c))
    }

    /// `sum p(i,j) w(i,j) / total`.
    pub fn weighted_mean(&self, w: impl Fn(f64, f64) -> f64) -> f64 {
        self.cells().map(|(i, j, c)| c * w(i, j)).sum::<f64>() / self.total()
    }

    /// `sum_i (sum_j p(i,j))^2`.
    pub fn level_nonuniformity(&self) -> f64 {
        (0..self.ng)
            .map(|i| {
                let r: f64 = self.counts[i * self.max_size..(i + 1) * self.max_size].iter().sum();
                r * r
            })
            .sum()
    }

    /// `sum_j (sum_i p(i,j))^2`.
    pub fn size_nonuniformity(&self) -> f64 {
        (0..self.max_size)
            .map(|j| {
                let c: f64 = (0..self.ng).map(|i| self.counts[i * self.max_size + j]).sum();
                c * c
            })
            .sum()
    }

    /// Variances of level and of size under the normalized matrix.
    pub fn variances(&self) -> (f64, f64) {
        let mu_i = self.weighted_mean(|i, _| i);
        let mu_j = self.weighted_mean(|_, j| j);
        (
            self.weighted_mean(|i, _| (i - mu_i).powi(2)),
            self.weighted_mean(|_, j| (j - mu_j).powi(2)),
        )
    }

    pub fn entropy(&self, eps: f64) -> f64 {
        let n = self.total();
        -self
            .cells()
            .map(|(_, _, c)| {
                let p = c / n;
                p * super::log2_guarded(p, eps)
            })
            .sum::<f64>()
    }

    /// The sixteen features shared by run-length and size-zone matrices, with
    /// `voxels` as the denominator of the percentage feature.
    pub fn run_like_features(&self, voxels: f64, eps: f64) -> [f64; 16] {
        let n = self.total();
        let (glv, sv) = self.variances();
        [
            self.weighted_mean(|_, j| 1.0 / (j * j)),
            self.weighted_mean(|_, j| j * j),
            self.level_nonuniformity() / n,
            self.level_nonuniformity() / (n * n),
            self.size_nonuniformity() / n,
            self.size_nonuniformity() / (n * n),
            n / voxels,
            glv,
            sv,
            self.entropy(eps),
            self.weighted_mean(|i, _| 1.0 / (i * i)),
            self.weighted_mean(|i, _| i * i),
            self.weighted_mean(|i, j| 1.0 / (i * i * j * j)),
            self.weighted_mean(|i, j| i * i / (j * j)),
            self.weighted_mean(|i, j| j * j / (i * i)),
            self.weighted_mean(|i, j| i * i * j * j),
        ]
    }
}
