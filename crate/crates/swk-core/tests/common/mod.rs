//! Independent oracles shared by the integration tests. Nothing here calls the
//! routine it is used to check.
#![allow(dead_code)]

/// `|mean_I Ω − mean Ω| ≤ (K/N)(n − |I|)` over every non-empty subset `I`.
pub fn subset_sticking(omegas: &[f64], coupling_k: f64, n_total: usize, tol: f64) -> bool {
    let n = omegas.len();
    let mean = omegas.iter().sum::<f64>() / n as f64;
    let kn = coupling_k / n_total as f64;
    for mask in 1u32..(1 << n) {
        let m = mask.count_ones() as usize;
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| omegas[i]).sum();
        if (s / m as f64 - mean).abs() > kn * (n - m) as f64 + tol {
            return false;
        }
    }
    true
}

/// Largest violation of `Y·j = x`, `Y = −Yᵀ`, `|Y_ij| ≤ 1` by a dense matrix.
pub fn witness_residual(y: &[Vec<f64>], x: &[f64]) -> f64 {
    let n = x.len();
    let mut r = 0.0f64;
    for i in 0..n {
        let s: f64 = y[i].iter().sum();
        r = r.max((s - x[i]).abs());
        for j in 0..n {
            r = r.max((y[i][j] + y[j][i]).abs());
            r = r.max(y[i][j].abs() - 1.0);
        }
    }
    r
}

/// Every point `drift + (K/N)·(row sums of Y)` with `Y` a skew matrix whose
/// entries inside each cluster sit on the cube vertices `±1`.
pub fn skew_grid_points(drift: &[f64], clusters: &[Vec<usize>], kn: f64) -> Vec<Vec<f64>> {
    let mut pts = vec![drift.to_vec()];
    for c in clusters {
        let pairs: Vec<(usize, usize)> =
            (0..c.len()).flat_map(|a| ((a + 1)..c.len()).map(move |b| (c[a], c[b]))).collect();
        if pairs.is_empty() {
            continue;
        }
        let mut next = Vec::new();
        for base in &pts {
            for mask in 0u32..(1 << pairs.len()) {
                let mut p = base.clone();
                for (bit, &(i, j)) in pairs.iter().enumerate() {
                    let y = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                    p[i] += kn * y;
                    p[j] -= kn * y;
                }
                next.push(p);
            }
        }
        pts = next;
    }
    pts
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of `{v : Σ_{i∈c} vᵢ = 0 for every cluster c, vᵢ = 0 on singletons}`.
pub fn cluster_subspace(n: usize, clusters: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in clusters {
        for &k in &c[1..] {
            let mut v = vec![0.0; n];
            v[c[0]] = 1.0;
            v[k] = -1.0;
            for b in &basis {
                let d = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Convex hull of a finite point set, as supporting hyperplanes in the
/// coordinates of an orthonormal basis of its affine span.
pub struct Hull {
    origin: Vec<f64>,
    basis: Vec<Vec<f64>>,
    /// `(unit normal, offset)` with the hull on `n·y ≤ b`.
    facets: Vec<(Vec<f64>, f64)>,
}

fn coords(basis: &[Vec<f64>], origin: &[f64], p: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = p.iter().zip(origin).map(|(a, b)| a - b).collect();
    basis.iter().map(|b| dot(b, &d)).collect()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl Hull {
    /// Facet enumeration by brute force; the affine span must be `basis`
    /// (dimension ≤ 3) through `origin`.
    pub fn new(points: &[Vec<f64>], origin: &[f64], basis: Vec<Vec<f64>>) -> Hull {
        let dim = basis.len();
        assert!(dim <= 3, "brute-force hull supports dimension ≤ 3");
        let mut ys: Vec<Vec<f64>> = points.iter().map(|p| coords(&basis, origin, p)).collect();
        ys.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        ys.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
        let mut facets = Vec::new();
        let mut candidate = |normal: Vec<f64>, anchor: &[f64]| {
            let len = dot(&normal, &normal).sqrt();
            if len < 1e-12 {
                return;
            }
            let nrm: Vec<f64> = normal.iter().map(|x| x / len).collect();
            let b = dot(&nrm, anchor);
            let side: Vec<f64> = ys.iter().map(|y| dot(&nrm, y) - b).collect();
            if side.iter().all(|&s| s <= 1e-10) {
                facets.push((nrm.clone(), b));
            }
            if side.iter().all(|&s| s >= -1e-10) {
                facets.push((nrm.iter().map(|x| -x).collect(), -b));
            }
        };
        match dim {
            0 => {}
            1 => {
                for y in &ys {
                    candidate(vec![1.0], y);
                }
            }
            2 => {
                for i in 0..ys.len() {
                    for j in (i + 1)..ys.len() {
                        let e = [ys[j][0] - ys[i][0], ys[j][1] - ys[i][1]];
                        candidate(vec![-e[1], e[0]], &ys[i]);
                    }
                }
            }
            _ => {
                for i in 0..ys.len() {
                    for j in (i + 1)..ys.len() {
                        for k in (j + 1)..ys.len() {
                            let u: Vec<f64> = ys[j].iter().zip(&ys[i]).map(|(a, b)| a - b).collect();
                            let v: Vec<f64> = ys[k].iter().zip(&ys[i]).map(|(a, b)| a - b).collect();
                            candidate(cross(&u, &v), &ys[i]);
                        }
                    }
                }
            }
        }
        let mut unique: Vec<(Vec<f64>, f64)> = Vec::new();
        for f in facets {
            let dup = unique
                .iter()
                .any(|(n, b)| (b - f.1).abs() < 1e-9 && n.iter().zip(&f.0).all(|(x, y)| (x - y).abs() < 1e-9));
            if !dup {
                unique.push(f);
            }
        }
        Hull { origin: origin.to_vec(), basis, facets: unique }
    }

    /// Signed distance-like margin of `p`: positive inside, negative outside;
    /// points off the affine span get minus their distance to it.
    pub fn margin(&self, p: &[f64]) -> f64 {
        let y = coords(&self.basis, &self.origin, p);
        let mut back = self.origin.clone();
        for (b, c) in self.basis.iter().zip(&y) {
            back.iter_mut().zip(b).for_each(|(x, v)| *x += c * v);
        }
        let off: f64 = back.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if off > 1e-9 {
            return -off;
        }
        if self.basis.is_empty() {
            return 0.0;
        }
        self.facets.iter().map(|(n, b)| b - dot(n, &y)).fold(f64::INFINITY, f64::min)
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    /// Points of `points` lying on at least `dim` distinct facets, deduplicated.
    pub fn vertices(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dim = self.basis.len();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in points {
            let y = coords(&self.basis, &self.origin, p);
            let on = self.facets.iter().filter(|(n, b)| (b - dot(n, &y)).abs() < 1e-9).count();
            if on >= dim && !out.iter().any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() < 1e-9)) {
                out.push(p.clone());
            }
        }
        out
    }
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫₀^x sin t / t^{2α} dt` for `α < 1/2`. With `t = u^q`, `q = 1/(1−2α)`,
/// the integrand becomes the bounded `q sin(u^q)`.
pub fn w_singular_simpson(x: f64, alpha: f64) -> f64 {
    let q = 1.0 / (1.0 - 2.0 * alpha);
    simpson(|u: f64| q * u.powf(q).sin(), 0.0, x.powf(1.0 / q), 20_000)
}

/// Root of `2α sin θ − θ cos θ` on `(0, π/2)` by plain bisection.
pub fn theta_tilde_bisect(alpha: f64) -> f64 {
    let f = |x: f64| 2.0 * alpha * x.sin() - x * x.cos();
    let (mut lo, mut hi) = (1e-6, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo).signum() == f(mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Collision time of two identical oscillators, `∫₀^{θ₀} θ^{2α}/(K sin θ) dθ`,
/// computed with `θ = u^{1/(2α)}` so the integrand `p u^p / sin(u^p)` is bounded.
pub fn two_oscillator_collision_time(theta0: f64, alpha: f64, k: f64) -> f64 {
    let p = 1.0 / (2.0 * alpha);
    let g = |u: f64| {
        if u == 0.0 {
            return p;
        }
        let th = u.powf(p);
        p * th / th.sin()
    };
    simpson(g, 0.0, theta0.powf(2.0 * alpha), 20_000) / k
}
