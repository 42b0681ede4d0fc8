//! Gray level co-occurrence features.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::{log2_guarded, unique_directions, DiscretizedRoi, TextureConfig};

/// Second eigenvalues below this are treated as exactly zero by `Mcc`.
pub const MCC_EIGEN_FLOOR: f64 = 1e-12;

/// Symmetric, normalized co-occurrence matrix for one offset, `ng * ng`
/// row-major with zero-based indices. `None` when no in-mask pair exists.
pub fn glcm_matrix(roi: &DiscretizedRoi, offset: [isize; 3]) -> Option<Vec<f64>> {
    let ng = roi.ng() as usize;
    let mut p = vec![0.0; ng * ng];
    let mut pairs = 0usize;
    for (idx, &a) in roi.levels().iter().enumerate() {
        if a == 0 {
            continue;
        }
        let c = roi.coords(idx);
        let b = roi.level_at([0, 1, 2].map(|k| c[k] as isize + offset[k]));
        if b == 0 {
            continue;
        }
        let (i, j) = (a as usize - 1, b as usize - 1);
        p[i * ng + j] += 1.0;
        p[j * ng + i] += 1.0;
        pairs += 1;
    }
    if pairs == 0 {
        return None;
    }
    let total = 2.0 * pairs as f64;
    p.iter_mut().for_each(|v| *v /= total);
    Some(p)
}

/// The 24 features of one normalized symmetric matrix.
pub fn matrix_features(p: &[f64], ng: usize, eps: f64) -> [f64; 24] {
    let lv = |k: usize| (k + 1) as f64;
    let mut px = vec![0.0; ng];
    for i in 0..ng {
        px[i] = p[i * ng..(i + 1) * ng].iter().sum();
    }
    // Symmetric: the column marginal equals the row marginal.
    let py = px.clone();
    let mut sum_dist = vec![0.0; 2 * ng + 1];
    let mut diff_dist = vec![0.0; ng];

    let mut ux = 0.0;
    let mut uy = 0.0;
    for i in 0..ng {
        ux += lv(i) * px[i];
        uy += lv(i) * py[i];
    }

    let mut autocorr = 0.0;
    let (mut prom, mut shade, mut tend) = (0.0, 0.0, 0.0);
    let mut contrast = 0.0;
    let mut corm = 0.0;
    let mut energy = 0.0;
    let mut hxy = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    let (mut idm, mut idmn, mut id, mut idn) = (0.0, 0.0, 0.0, 0.0);
    let mut maxp = 0.0f64;
    let mut sum_squares = 0.0;
    let ngf = ng as f64;

    for i in 0..ng {
        for j in 0..ng {
            let (fi, fj) = (lv(i), lv(j));
            let pxy = px[i] * py[j];
            if pxy > 0.0 {
                hxy2 -= pxy * log2_guarded(pxy, eps);
            }
            let v = p[i * ng + j];
            if v == 0.0 {
                continue;
            }
            let s = fi + fj - ux - uy;
            let d = fi - fj;
            autocorr += v * fi * fj;
            prom += v * s.powi(4);
            shade += v * s.powi(3);
            tend += v * s * s;
            contrast += v * d * d;
            corm += v * (fi - ux) * (fj - uy);
            energy += v * v;
            hxy -= v * log2_guarded(v, eps);
            hxy1 -= v * log2_guarded(pxy, eps);
            idm += v / (1.0 + d * d);
            idmn += v / (1.0 + d * d / (ngf * ngf));
            id += v / (1.0 + d.abs());
            idn += v / (1.0 + d.abs() / ngf);
            maxp = maxp.max(v);
            sum_squares += v * (fi - ux).powi(2);
            sum_dist[i + j + 2] += v;
            diff_dist[i.abs_diff(j)] += v;
        }
    }

    let sigx = px.iter().enumerate().map(|(i, &q)| q * (lv(i) - ux).powi(2)).sum::<f64>().sqrt();
    let sigy = py.iter().enumerate().map(|(i, &q)| q * (lv(i) - uy).powi(2)).sum::<f64>().sqrt();
    let correlation = if sigx * sigy == 0.0 { 1.0 } else { corm / (sigx * sigy) };

    let entropy_of = |q: &[f64]| -> f64 { -q.iter().filter(|&&v| v > 0.0).map(|&v| v * log2_guarded(v, eps)).sum::<f64>() };
    let hx = entropy_of(&px);
    let hy = entropy_of(&py);

    let diff_avg: f64 = diff_dist.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let diff_var: f64 = diff_dist.iter().enumerate().map(|(k, &v)| (k as f64 - diff_avg).powi(2) * v).sum();
    let diff_entropy = entropy_of(&diff_dist);
    let inv_var: f64 = diff_dist.iter().enumerate().skip(1).map(|(k, &v)| v / (k * k) as f64).sum();
    let sum_avg: f64 = sum_dist.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let sum_entropy = entropy_of(&sum_dist);

    let hmax = hx.max(hy);
    let imc1 = if hmax == 0.0 { 0.0 } else { (hxy - hxy1) / hmax };
    let imc2 = if hxy2 > hxy { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt() } else { 0.0 };

    [
        autocorr,
        ux,
        prom,
        shade,
        tend,
        contrast,
        correlation,
        diff_avg,
        diff_entropy,
        diff_var,
        energy,
        hxy,
        imc1,
        imc2,
        idm,
        idmn,
        id,
        idn,
        inv_var,
        maxp,
        sum_avg,
        sum_entropy,
        sum_squares,
        mcc(p, ng, &px, &py),
    ]
}

/// Square root of the second largest eigenvalue of
/// `Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k))`, over levels with non-zero
/// marginals. Q is similar to the symmetric `B B^T` with
/// `B(i,k) = p(i,k) / sqrt(px(i) py(k))`, which is decomposed instead.
/// Eigenvalues below [`MCC_EIGEN_FLOOR`] are rounding noise and count as 0.
fn mcc(p: &[f64], ng: usize, px: &[f64], py: &[f64]) -> f64 {
    let present: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let n = present.len();
    if n < 2 {
        return 1.0;
    }
    let b = DMatrix::from_fn(n, n, |r, c| {
        let (i, k) = (present[r], present[c]);
        p[i * ng + k] / (px[i] * py[k]).sqrt()
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(&b * b.transpose()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[1] < MCC_EIGEN_FLOOR {
        0.0
    } else {
        ev[1].sqrt()
    }
}

/// Features averaged over the given directions (scaled by the configured
/// distance), skipping directions without any in-mask pair.
pub fn glcm_features_along(roi: &DiscretizedRoi, directions: &[[isize; 3]], config: &TextureConfig) -> Result<[f64; 24]> {
    let ng = roi.ng() as usize;
    let dist = config.glcm_distance as isize;
    let mut acc = [0.0; 24];
    let mut used = 0usize;
    for d in directions {
        if let Some(p) = glcm_matrix(roi, d.map(|v| v * dist)) {
            let f = matrix_features(&p, ng, config.epsilon);
            acc.iter_mut().zip(f).for_each(|(a, v)| *a += v);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateRoi("no in-mask voxel pair for the co-occurrence matrix".into()));
    }
    Ok(acc.map(|v| v / used as f64))
}

/// The 24 features in [`super::GLCM`] order, averaged over the 13 directions.
pub fn glcm_features(roi: &DiscretizedRoi, config: &TextureConfig) -> Result<[f64; 24]> {
    glcm_features_along(roi, &unique_directions(), config)
}
