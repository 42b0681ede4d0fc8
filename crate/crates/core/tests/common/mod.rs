//! Brute-force reference implementations used by the property and
//! acceptance tests. They follow the feature definitions directly and share
//! no code with the library beyond its input types.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;

use edemarad::radiomics::DiscretizedRoi;

pub const EPS: f64 = 2.2e-16;

/// `|a - b| <= rel * max(|a|, |b|) + 1e-12`.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

pub fn all_close(a: &[f64], b: &[f64], rel: f64) -> Result<(), String> {
    if a.len() != b.len() {
        return Err(format!("length {} vs {}", a.len(), b.len()));
    }
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if !close(*x, *y, rel) {
            return Err(format!("entry {k}: {x} vs {y}"));
        }
    }
    Ok(())
}

fn lg(p: f64) -> f64 {
    (p + EPS).log2()
}

type P3 = [isize; 3];

struct Roi<'a> {
    d: &'a DiscretizedRoi,
}

impl Roi<'_> {
    fn dims(&self) -> [isize; 3] {
        self.d.dims().map(|v| v as isize)
    }

    fn inside(&self, p: P3) -> bool {
        let n = self.dims();
        (0..3).all(|a| p[a] >= 0 && p[a] < n[a])
    }

    fn at(&self, p: P3) -> u32 {
        if !self.inside(p) {
            return 0;
        }
        let n = self.dims();
        self.d.levels()[(p[0] + n[0] * (p[1] + n[1] * p[2])) as usize]
    }

    fn points(&self) -> Vec<P3> {
        let n = self.dims();
        let mut v = Vec::new();
        for z in 0..n[2] {
            for y in 0..n[1] {
                for x in 0..n[0] {
                    v.push([x, y, z]);
                }
            }
        }
        v
    }

    fn in_mask(&self) -> Vec<P3> {
        self.points().into_iter().filter(|&p| self.at(p) > 0).collect()
    }
}

fn add(p: P3, d: P3) -> P3 {
    [p[0] + d[0], p[1] + d[1], p[2] + d[2]]
}

/// The 13 directions: one of each `+-d` pair among the 26 neighbour offsets,
/// keeping the member that is lexicographically positive in (z, y, x).
pub fn thirteen() -> Vec<P3> {
    let mut out = Vec::new();
    for x in -1..=1isize {
        for y in -1..=1isize {
            for z in -1..=1isize {
                if (z, y, x) > (0, 0, 0) {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out.sort_by_key(|d| (d[2], d[1], d[0]));
    out
}

fn chebyshev(r: isize) -> Vec<P3> {
    let mut out = Vec::new();
    for z in -r..=r {
        for y in -r..=r {
            for x in -r..=r {
                if x != 0 || y != 0 || z != 0 {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------- GLCM

fn glcm_one(roi: &Roi, d: P3, ng: usize) -> Option<[f64; 24]> {
    let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
    for a in roi.in_mask() {
        let b = add(a, d);
        let (la, lb) = (roi.at(a) as usize, roi.at(b) as usize);
        if lb == 0 {
            continue;
        }
        *counts.entry((la, lb)).or_default() += 1.0;
        *counts.entry((lb, la)).or_default() += 1.0;
    }
    let total: f64 = counts.values().sum();
    if total == 0.0 {
        return None;
    }
    let p = |i: usize, j: usize| counts.get(&(i, j)).copied().unwrap_or(0.0) / total;
    let lv: Vec<usize> = (1..=ng).collect();
    let px: Vec<f64> = lv.iter().map(|&i| lv.iter().map(|&j| p(i, j)).sum()).collect();
    let py: Vec<f64> = lv.iter().map(|&j| lv.iter().map(|&i| p(i, j)).sum()).collect();
    let ux: f64 = lv.iter().map(|&i| i as f64 * px[i - 1]).sum();
    let uy: f64 = lv.iter().map(|&j| j as f64 * py[j - 1]).sum();
    let sx = lv.iter().map(|&i| (i as f64 - ux).powi(2) * px[i - 1]).sum::<f64>().sqrt();
    let sy = lv.iter().map(|&j| (j as f64 - uy).powi(2) * py[j - 1]).sum::<f64>().sqrt();

    let mut pxpy = vec![0.0; 2 * ng + 1];
    let mut pxmy = vec![0.0; ng];
    let mut f = BTreeMap::<&str, f64>::new();
    let mut acc = |k: &'static str, v: f64| *f.entry(k).or_insert(0.0) += v;
    let ngf = ng as f64;
    let (mut hxy, mut hxy1, mut hxy2) = (0.0, 0.0, 0.0);
    let mut maxp = 0.0f64;
    for &i in &lv {
        for &j in &lv {
            let v = p(i, j);
            let (fi, fj) = (i as f64, j as f64);
            pxpy[i + j] += v;
            pxmy[i.abs_diff(j)] += v;
            acc("Autocorrelation", v * fi * fj);
            acc("ClusterProminence", v * (fi + fj - ux - uy).powi(4));
            acc("ClusterShade", v * (fi + fj - ux - uy).powi(3));
            acc("ClusterTendency", v * (fi + fj - ux - uy).powi(2));
            acc("Contrast", v * (fi - fj).powi(2));
            acc("Corm", v * (fi - ux) * (fj - uy));
            acc("JointEnergy", v * v);
            acc("Idm", v / (1.0 + (fi - fj).powi(2)));
            acc("Idmn", v / (1.0 + (fi - fj).powi(2) / (ngf * ngf)));
            acc("Id", v / (1.0 + (fi - fj).abs()));
            acc("Idn", v / (1.0 + (fi - fj).abs() / ngf));
            acc("SumSquares", v * (fi - ux).powi(2));
            if v > 0.0 {
                hxy -= v * lg(v);
                hxy1 -= v * lg(px[i - 1] * py[j - 1]);
            }
            let q = px[i - 1] * py[j - 1];
            if q > 0.0 {
                hxy2 -= q * lg(q);
            }
            maxp = maxp.max(v);
        }
    }
    let ent = |v: &[f64]| -> f64 { v.iter().filter(|&&x| x > 0.0).map(|&x| -x * lg(x)).sum() };
    let hx = ent(&px);
    let hy = ent(&py);
    let da: f64 = (0..ng).map(|k| k as f64 * pxmy[k]).sum();
    let dv: f64 = (0..ng).map(|k| (k as f64 - da).powi(2) * pxmy[k]).sum();
    let iv: f64 = (1..ng).map(|k| pxmy[k] / (k * k) as f64).sum();
    let sa: f64 = (2..=2 * ng).map(|k| k as f64 * pxpy[k]).sum();

    let corr = if sx * sy == 0.0 { 1.0 } else { f["Corm"] / (sx * sy) };
    let imc1 = if hx.max(hy) == 0.0 { 0.0 } else { (hxy - hxy1) / hx.max(hy) };
    let imc2 = if hxy2 - hxy > 0.0 { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt() } else { 0.0 };

    // Q(i,j) = sum_k p(i,k) p(j,k) / (px(i) py(k)) over non-empty levels.
    let present: Vec<usize> = lv.iter().copied().filter(|&i| px[i - 1] > 0.0).collect();
    let mcc = if present.len() < 2 {
        1.0
    } else {
        let n = present.len();
        let q = DMatrix::from_fn(n, n, |r, c| {
            let (i, j) = (present[r], present[c]);
            present
                .iter()
                .map(|&k| p(i, k) * p(j, k) / (px[i - 1] * py[k - 1]))
                .sum::<f64>()
        });
        let mut ev: Vec<f64> = q.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        if ev[1] < 1e-12 { 0.0 } else { ev[1].sqrt() }
    };

    Some([
        f["Autocorrelation"],
        ux,
        f["ClusterProminence"],
        f["ClusterShade"],
        f["ClusterTendency"],
        f["Contrast"],
        corr,
        da,
        ent(&pxmy),
        dv,
        f["JointEnergy"],
        hxy,
        imc1,
        imc2,
        f["Idm"],
        f["Idmn"],
        f["Id"],
        f["Idn"],
        iv,
        maxp,
        sa,
        ent(&pxpy),
        f["SumSquares"],
        mcc,
    ])
}

/// Mean over the given offsets of the per-direction features; `None` when
/// no offset has a pair.
pub fn glcm_oracle(d: &DiscretizedRoi, offsets: &[P3]) -> Option<[f64; 24]> {
    let roi = Roi { d };
    let ng = d.ng() as usize;
    let per: Vec<[f64; 24]> = offsets.iter().filter_map(|&o| glcm_one(&roi, o, ng)).collect();
    if per.is_empty() {
        return None;
    }
    let mut out = [0.0; 24];
    for f in &per {
        for k in 0..24 {
            out[k] += f[k] / per.len() as f64;
        }
    }
    Some(out)
}

// ------------------------------------------------ run / zone / dependence

/// `(level, size) -> count`.
type Tally = BTreeMap<(usize, usize), f64>;

fn emph(t: &Tally, w: impl Fn(f64, f64) -> f64) -> f64 {
    let n: f64 = t.values().sum();
    t.iter().map(|(&(i, j), &c)| c * w(i as f64, j as f64)).sum::<f64>() / n
}

fn nonuniformity(t: &Tally, by_level: bool) -> f64 {
    let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(i, j), &c) in t {
        *sums.entry(if by_level { i } else { j }).or_default() += c;
    }
    sums.values().map(|s| s * s).sum()
}

fn run_like(t: &Tally, np: f64) -> [f64; 16] {
    let n: f64 = t.values().sum();
    let mi = emph(t, |i, _| i);
    let mj = emph(t, |_, j| j);
    let entropy: f64 = t.values().map(|&c| -(c / n) * lg(c / n)).sum();
    [
        emph(t, |_, j| 1.0 / (j * j)),
        emph(t, |_, j| j * j),
        nonuniformity(t, true) / n,
        nonuniformity(t, true) / (n * n),
        nonuniformity(t, false) / n,
        nonuniformity(t, false) / (n * n),
        n / np,
        emph(t, |i, _| (i - mi).powi(2)),
        emph(t, |_, j| (j - mj).powi(2)),
        entropy,
        emph(t, |i, _| 1.0 / (i * i)),
        emph(t, |i, _| i * i),
        emph(t, |i, j| 1.0 / (i * i * j * j)),
        emph(t, |i, j| i * i / (j * j)),
        emph(t, |i, j| j * j / (i * i)),
        emph(t, |i, j| i * i * j * j),
    ]
}

/// Runs along `d`: walk every grid line from its first voxel and cut it at
/// each level change.
pub fn run_tally(d: &DiscretizedRoi, dir: P3) -> Tally {
    let roi = Roi { d };
    let mut t = Tally::new();
    for start in roi.points() {
        if roi.inside(add(start, [-dir[0], -dir[1], -dir[2]])) {
            continue;
        }
        let mut line = Vec::new();
        let mut p = start;
        while roi.inside(p) {
            line.push(roi.at(p));
            p = add(p, dir);
        }
        let mut k = 0;
        while k < line.len() {
            let mut e = k;
            while e < line.len() && line[e] == line[k] {
                e += 1;
            }
            if line[k] > 0 {
                *t.entry((line[k] as usize, e - k)).or_default() += 1.0;
            }
            k = e;
        }
    }
    t
}

pub fn glrlm_oracle(d: &DiscretizedRoi, dirs: &[P3]) -> [f64; 16] {
    let np = Roi { d }.in_mask().len() as f64;
    let mut out = [0.0; 16];
    for &dir in dirs {
        let f = run_like(&run_tally(d, dir), np);
        for k in 0..16 {
            out[k] += f[k] / dirs.len() as f64;
        }
    }
    out
}

/// Zones by breadth-first flood fill over the 26-neighbourhood.
pub fn zone_tally(d: &DiscretizedRoi) -> Tally {
    let roi = Roi { d };
    let mut seen = std::collections::HashSet::new();
    let mut t = Tally::new();
    let nb = chebyshev(1);
    for s in roi.in_mask() {
        if !seen.insert(s) {
            continue;
        }
        let level = roi.at(s);
        let mut size = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(p) = queue.pop_front() {
            size += 1;
            for o in &nb {
                let q = add(p, *o);
                if roi.at(q) == level && seen.insert(q) {
                    queue.push_back(q);
                }
            }
        }
        *t.entry((level as usize, size)).or_default() += 1.0;
    }
    t
}

pub fn glszm_oracle(d: &DiscretizedRoi) -> [f64; 16] {
    let np = Roi { d }.in_mask().len() as f64;
    run_like(&zone_tally(d), np)
}

pub fn gldm_oracle(d: &DiscretizedRoi, alpha: u32) -> [f64; 14] {
    let roi = Roi { d };
    let nb = chebyshev(1);
    let mut t = Tally::new();
    for p in roi.in_mask() {
        let l = roi.at(p);
        let dep = nb
            .iter()
            .filter(|o| {
                let m = roi.at(add(p, **o));
                m > 0 && (m as i64 - l as i64).abs() <= alpha as i64
            })
            .count();
        *t.entry((l as usize, dep + 1)).or_default() += 1.0;
    }
    let n: f64 = t.values().sum();
    let mi = emph(&t, |i, _| i);
    let mj = emph(&t, |_, j| j);
    let entropy: f64 = t.values().map(|&c| -(c / n) * lg(c / n)).sum();
    [
        emph(&t, |_, j| 1.0 / (j * j)),
        emph(&t, |_, j| j * j),
        nonuniformity(&t, true) / n,
        nonuniformity(&t, false) / n,
        nonuniformity(&t, false) / (n * n),
        emph(&t, |i, _| (i - mi).powi(2)),
        emph(&t, |_, j| (j - mj).powi(2)),
        entropy,
        emph(&t, |i, _| 1.0 / (i * i)),
        emph(&t, |i, _| i * i),
        emph(&t, |i, j| 1.0 / (i * i * j * j)),
        emph(&t, |i, j| i * i / (j * j)),
        emph(&t, |i, j| j * j / (i * i)),
        emph(&t, |i, j| i * i * j * j),
    ]
}

/// `None` when no in-mask voxel has an in-mask neighbour.
pub fn ngtdm_oracle(d: &DiscretizedRoi, distance: isize) -> Option<[f64; 5]> {
    let roi = Roi { d };
    let nb = chebyshev(distance);
    let ng = d.ng() as usize;
    let mut n = vec![0.0; ng + 1];
    let mut s = vec![0.0; ng + 1];
    for p in roi.in_mask() {
        let vals: Vec<f64> = nb.iter().map(|o| roi.at(add(p, *o))).filter(|&l| l > 0).map(f64::from).collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let l = roi.at(p) as usize;
        n[l] += 1.0;
        s[l] += (l as f64 - mean).abs();
    }
    let nvp: f64 = n.iter().sum();
    if nvp == 0.0 {
        return None;
    }
    let p: Vec<f64> = n.iter().map(|v| v / nvp).collect();
    let levels: Vec<usize> = (1..=ng).filter(|&i| p[i] > 0.0).collect();
    let ngp = levels.len() as f64;
    let sps: f64 = levels.iter().map(|&i| p[i] * s[i]).sum();
    let ss: f64 = levels.iter().map(|&i| s[i]).sum();
    let coarseness = if sps < EPS { 1e6 } else { 1.0 / sps };
    let (mut c1, mut bd, mut cx, mut st) = (0.0, 0.0, 0.0, 0.0);
    for &i in &levels {
        for &j in &levels {
            let (fi, fj) = (i as f64, j as f64);
            c1 += p[i] * p[j] * (fi - fj).powi(2);
            bd += (fi * p[i] - fj * p[j]).abs();
            cx += (fi - fj).abs() * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j]);
            st += (p[i] + p[j]) * (fi - fj).powi(2);
        }
    }
    let contrast = if ngp > 1.0 { c1 / (ngp * (ngp - 1.0)) * ss / nvp } else { 0.0 };
    let busyness = if bd < EPS { 0.0 } else { sps / bd };
    let strength = if ss < EPS { 0.0 } else { st / ss };
    Some([coarseness, contrast, busyness, cx / nvp, strength])
}

/// Random ROI with up to `max_dim` voxels per axis and levels in `0..=max_level`
/// (0 meaning outside the mask); at least one voxel is inside.
pub fn random_roi(rng: &mut impl Rng, max_dim: usize, max_level: u32) -> DiscretizedRoi {
    let dims = [0; 3].map(|_| rng.gen_range(1..=max_dim));
    let n: usize = dims.iter().product();
    let hole_rate = rng.gen_range(0.0..0.4);
    let mut levels: Vec<u32> = (0..n)
        .map(|_| if rng.gen_bool(hole_rate) { 0 } else { rng.gen_range(1..=max_level) })
        .collect();
    if levels.iter().all(|&l| l == 0) {
        levels[rng.gen_range(0..n)] = 1;
    }
    DiscretizedRoi::from_levels(dims, levels).unwrap()
}

// --------------------------------------------------------- first order

/// First-order features by direct summation over the in-mask values, with
/// levels from the fixed bin width anchored at the minimum.
pub fn first_order_oracle(values: &[f64], voxel_volume: f64, bin_width: f64) -> [f64; 18] {
    let n = values.len() as f64;
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |q: f64| {
        let h = (s.len() - 1) as f64 * q;
        let (f, c) = (h.floor() as usize, h.ceil() as usize);
        s[f] + (h - f as f64) * (s[c] - s[f])
    };
    let mean = values.iter().sum::<f64>() / n;
    let energy: f64 = values.iter().map(|v| v * v).sum();
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let (p10, p90) = (pct(0.1), pct(0.9));
    let mid: Vec<f64> = values.iter().copied().filter(|&v| p10 <= v && v <= p90).collect();
    let mid_mean = mid.iter().sum::<f64>() / mid.len() as f64;
    let min = s[0];
    let mut hist: BTreeMap<i64, f64> = BTreeMap::new();
    for v in values {
        *hist.entry(((v - min) / bin_width).floor() as i64).or_default() += 1.0;
    }
    let entropy: f64 = hist.values().map(|c| -(c / n) * lg(c / n)).sum();
    let uniformity: f64 = hist.values().map(|c| (c / n) * (c / n)).sum();
    [
        energy,
        energy * voxel_volume,
        entropy,
        min,
        p10,
        p90,
        s[s.len() - 1],
        mean,
        pct(0.5),
        pct(0.75) - pct(0.25),
        s[s.len() - 1] - min,
        values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n,
        if mid.is_empty() { 0.0 } else { mid.iter().map(|v| (v - mid_mean).abs()).sum::<f64>() / mid.len() as f64 },
        (energy / n).sqrt(),
        if var > 0.0 { m3 / var.powf(1.5) } else { 0.0 },
        if var > 0.0 { m4 / (var * var) } else { 0.0 },
        var,
        uniformity,
    ]
}

// ------------------------------------------------------------ filtering

/// Dense 3D convolution with the outer-product Gaussian kernel and
/// whole-sample mirror boundaries (`-1 -> 1`, `n -> n - 2`).
pub fn dense_gaussian(data: &[f64], dims: [usize; 3], spacing: [f64; 3], sigma_mm: [f64; 3], trunc: f64) -> Vec<f64> {
    let mut kernels = Vec::new();
    for a in 0..3 {
        let sigma = sigma_mm[a] / spacing[a];
        let r = ((trunc * sigma).ceil() as isize).max(1);
        let w: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let total: f64 = w.iter().sum();
        kernels.push((r, w.into_iter().map(|v| v / total).collect::<Vec<f64>>()));
    }
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        if n == 1 {
            return 0;
        }
        let period = 2 * (n - 1);
        let mut m = i.rem_euclid(period);
        if m >= n {
            m = period - m;
        }
        m as usize
    };
    let [nx, ny, nz] = dims;
    let mut out = vec![0.0; data.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = 0.0;
                for (kz, wz) in kernels[2].1.iter().enumerate() {
                    let zz = reflect(z as isize + kz as isize - kernels[2].0, nz);
                    for (ky, wy) in kernels[1].1.iter().enumerate() {
                        let yy = reflect(y as isize + ky as isize - kernels[1].0, ny);
                        for (kx, wx) in kernels[0].1.iter().enumerate() {
                            let xx = reflect(x as isize + kx as isize - kernels[0].0, nx);
                            acc += wx * wy * wz * data[xx + nx * (yy + ny * zz)];
                        }
                    }
                }
                out[x + nx * (y + ny * z)] = acc;
            }
        }
    }
    out
}

// ----------------------------------------------------------- boosting

/// Best `(feature, threshold, gain)` by evaluating every candidate
/// threshold from scratch; `None` if no candidate has positive gain.
pub fn brute_force_split(
    rows: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
) -> Option<(usize, f64, f64)> {
    let nf = rows[0].len();
    let obj = |gs: f64, hs: f64| gs * gs / (hs + lambda);
    let (gt, ht): (f64, f64) = (g.iter().sum(), h.iter().sum());
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..nf {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut gl, mut hl) = (0.0, 0.0);
            for (i, r) in rows.iter().enumerate() {
                if r[f] < t {
                    gl += g[i];
                    hl += h[i];
                }
            }
            if hl < min_child_weight || ht - hl < min_child_weight {
                continue;
            }
            let gain = 0.5 * (obj(gl, hl) + obj(gt - gl, ht - hl) - obj(gt, ht)) - gamma;
            let better = match best {
                None => gain > 0.0,
                Some((_, _, bg)) => gain > bg,
            };
            if better {
                best = Some((f, t, gain));
            }
        }
    }
    best
}
