//! Discrete spectrum of N point interactions from det Λ(z) = 0.
//!
//! Below E_1 the real symmetric Λ(z) has dΛ/dz = −(Gram matrix of the
//! G₀(·, a_j; z)), so its eigenvalues are nonincreasing in z and by Sylvester
//! inertia the number of negative eigenvalues of Λ(z) equals the number of
//! eigenvalues of H below z. Roots are located by bisecting that count in
//! the coordinate t = ln(E_1 − z); no crossing can be missed, whatever its
//! multiplicity.

use crate::error::{domain, Error, Result};
use crate::layer_green::{
    free_green, krein_entries, sorted_eigen, validate_all, Energy, LayerConfig, ModeEnergy, Perturbation,
};
use crate::spectrum_single::energy_at_depth;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Depth below which Λ is replaced by its rank-one asymptotic split.
const T_ASYMPTOTIC: f64 = -600.0;
const CLUSTER_TOL: f64 = 1e-8;
const DIAGNOSTIC_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvalue {
    pub z: f64,
    /// ln(E_1 − z)
    pub ln_gap: f64,
    pub multiplicity: usize,
    /// Orthonormal null vectors of Λ(z); switched-off perturbations carry 0.
    pub vectors: Vec<DVector<f64>>,
    /// max ‖Λd‖ / (max(‖Λ‖, 1 + max|α|) ‖d‖) over the null vectors
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Scan energies and the ascending eigenvalues of Λ at each of them.
    pub grid: Vec<f64>,
    pub branches: Vec<Vec<f64>>,
    pub count_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<Eigenvalue>,
    pub diagnostics: Diagnostics,
}

impl SpectrumResult {
    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }
}

/// Λ restricted to the active perturbations on the real axis below E_1.
struct RealKrein<'a> {
    perts: Vec<Perturbation>,
    active: Vec<usize>,
    n_all: usize,
    cfg: &'a LayerConfig,
}

impl<'a> RealKrein<'a> {
    fn new(perts: &[Perturbation], cfg: &'a LayerConfig) -> Result<Self> {
        validate_all(perts, cfg)?;
        let active: Vec<usize> = (0..perts.len()).filter(|&j| perts[j].is_active()).collect();
        Ok(Self { perts: active.iter().map(|&j| perts[j]).collect(), active, n_all: perts.len(), cfg })
    }

    fn dim(&self) -> usize {
        self.perts.len()
    }

    fn at_depth(&self, t: f64) -> Result<DMatrix<f64>> {
        let e = energy_at_depth(self.cfg, t);
        let m = ModeEnergy::new(&e, self.cfg)?;
        Ok(krein_entries(&self.perts, &m, self.cfg).map(|v| v.re))
    }

    fn count(&self, t: f64) -> Result<usize> {
        if t < T_ASYMPTOTIC {
            let (s, r) = self.asymptotic()?;
            let (vals, _) = sorted_eigen(r + &s * s.transpose() * (t / (2.0 * PI * self.cfg.d())));
            return Ok(vals.iter().filter(|&&v| v < 0.0).count());
        }
        let (vals, _) = sorted_eigen(self.at_depth(t)?);
        Ok(vals.iter().filter(|&&v| v < 0.0).count())
    }

    /// Λ(t) = (t/2πd) s sᵀ + R + O(t e^t) with s_j = sin(πb_j/d); returns
    /// (s, R).
    fn asymptotic(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.cfg.d();
        let s = DVector::from_iterator(self.dim(), self.perts.iter().map(|p| (PI * p.b / d).sin()));
        let ss = &s * s.transpose();
        let lam = self.at_depth(T_ASYMPTOTIC)?;
        let r = lam - &ss * (T_ASYMPTOTIC / (2.0 * PI * d));
        Ok((s, r))
    }

    fn embed(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_all);
        for (k, &j) in self.active.iter().enumerate() {
            out[j] = v[k];
        }
        out
    }
}

fn t_of(z: f64, cfg: &LayerConfig) -> f64 {
    (cfg.threshold(1) - z).ln()
}

/// Energy below which Λ(z) is positive definite, so no eigenvalue lies lower.
pub fn spectral_lower_bound(perts: &[Perturbation], cfg: &LayerConfig) -> Result<f64> {
    let kr = RealKrein::new(perts, cfg)?;
    lower_bound(&kr)
}

fn lower_bound(kr: &RealKrein) -> Result<f64> {
    let amin = kr.perts.iter().map(|p| p.alpha).fold(0.0f64, f64::min);
    let mut z = (-32.0 * PI * PI * amin * amin).min(-1.0) - 1.0;
    loop {
        if kr.count(t_of(z, kr.cfg))? == 0 {
            return Ok(z);
        }
        z *= 4.0;
        if z < -1e12 {
            return Err(Error::Singular("no lower spectral bound found".into()));
        }
    }
}

/// All eigenvalues in [lo, hi]. hi = E_1 includes the whole
/// approach to the threshold (eigenvalues closer to E_1 than rounding are
/// resolved through their ln-gap); lo = −∞ is replaced by a lower bound.
pub fn find_eigenvalues(perts: &[Perturbation], cfg: &LayerConfig, window: (f64, f64)) -> Result<SpectrumResult> {
    let e1 = cfg.threshold(1);
    let (lo, hi) = window;
    if hi > e1 || lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return domain(format!("window [{lo}, {hi}] must be an interval below E_1 = {e1}"));
    }
    let kr = RealKrein::new(perts, cfg)?;
    if kr.dim() == 0 {
        return Ok(SpectrumResult::default());
    }
    let lo = if lo == f64::NEG_INFINITY { lower_bound(&kr)? } else { lo };
    let t_hi = t_of(lo, cfg);
    let t_lo = if hi == e1 { f64::NEG_INFINITY } else { t_of(hi, cfg) };

    let mut evals = 0usize;
    let mut count = |t: f64| -> Result<usize> {
        evals += 1;
        kr.count(t)
    };
    let c_deep = count(t_hi)?;
    let mut jumps: Vec<(f64, usize)> = Vec::new();

    // part of the window in the asymptotic region: at most one root, explicit
    let t_cut = t_lo.max(T_ASYMPTOTIC);
    let c_cut = count(t_cut)?;
    if t_lo < T_ASYMPTOTIC {
        let (s, r) = kr.asymptotic()?;
        let c_lim = limit_count(&s, &r);
        if c_lim > c_cut {
            let t_star = asymptotic_root(&s, &r, kr.cfg.d())?;
            if t_star >= t_lo {
                jumps.push((t_star, c_lim - c_cut));
            }
        }
    }
    if c_cut > c_deep {
        bisect_jumps(&mut count, t_cut, c_cut, t_hi, c_deep, &mut jumps)?;
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let clusters = cluster(&jumps, cfg);
    let mut eigenvalues = Vec::with_capacity(clusters.len());
    for (t, mult) in clusters {
        eigenvalues.push(null_space(&kr, t, mult)?);
    }
    eigenvalues.sort_by(|a, b| a.z.total_cmp(&b.z).then(b.ln_gap.total_cmp(&a.ln_gap)));

    let diagnostics = trace_branches(&kr, lo, if hi == e1 { e1 - 1e-9 * e1 } else { hi }, evals)?;
    Ok(SpectrumResult { eigenvalues, diagnostics })
}

/// Number of negative eigenvalues of Λ(t) as t → −∞: one for the divergent
/// direction s plus the negative part of R on s⊥.
fn limit_count(s: &DVector<f64>, r: &DMatrix<f64>) -> usize {
    let n = r.nrows();
    let ss = s * s.transpose() / s.norm_squared();
    let p = DMatrix::identity(n, n) - &ss;
    let mu = 1e3 * (r.norm() + 1.0);
    let m = &p * r * &p + ss * mu;
    let (vals, _) = sorted_eigen(m);
    1 + vals.iter().filter(|&&v| v < 0.0).count()
}

/// Root of det(R + (t/2πd) s sᵀ) = 0 beyond the cut: t* = −2πd / (sᵀR⁻¹s).
fn asymptotic_root(s: &DVector<f64>, r: &DMatrix<f64>, d: f64) -> Result<f64> {
    let x = r.clone().lu().solve(s).ok_or_else(|| Error::Singular("asymptotic remainder is singular".into()))?;
    Ok(-2.0 * PI * d / s.dot(&x))
}

/// Recursive bisection of the inertia count on [t_a, t_b], t_a < t_b,
/// count(t_a) = c_a > c_b = count(t_b).
fn bisect_jumps(
    count: &mut impl FnMut(f64) -> Result<usize>,
    t_a: f64,
    c_a: usize,
    t_b: f64,
    c_b: usize,
    out: &mut Vec<(f64, usize)>,
) -> Result<()> {
    let mid = 0.5 * (t_a + t_b);
    if mid <= t_a || mid >= t_b || (t_b - t_a) <= 2.0 * f64::EPSILON * t_a.abs().max(t_b.abs()) {
        out.push((mid, c_a - c_b));
        return Ok(());
    }
    // rounding can flip tiny eigenvalues at a degeneracy; keep the count monotone
    let c_m = count(mid)?.clamp(c_b, c_a);
    if c_a > c_m {
        bisect_jumps(count, t_a, c_a, mid, c_m, out)?;
    }
    if c_m > c_b {
        bisect_jumps(count, mid, c_m, t_b, c_b, out)?;
    }
    Ok(())
}

fn cluster(jumps: &[(f64, usize)], cfg: &LayerConfig) -> Vec<(f64, usize)> {
    let e1 = cfg.threshold(1);
    let z = |t: f64| e1 - t.exp();
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &(t, k) in jumps {
        if let Some(last) = out.last_mut() {
            let (zl, zt) = (z(last.0), z(t));
            let close_z = (zl - zt).abs() <= CLUSTER_TOL * (1.0 + zt.abs());
            // depth comparison keeps eigenvalues apart that round to the same z near E_1
            let close_t = (last.0 - t).abs() <= CLUSTER_TOL * (1.0 + t.abs());
            if close_z && close_t {
                last.2 += t * k as f64;
                last.1 += k;
                last.0 = last.2 / last.1 as f64;
                continue;
            }
        }
        out.push((t, k, t * k as f64));
    }
    out.into_iter().map(|(t, k, _)| (t, k)).collect()
}

fn null_space(kr: &RealKrein, t: f64, mult: usize) -> Result<Eigenvalue> {
    let lam = if t < T_ASYMPTOTIC {
        let (s, r) = kr.asymptotic()?;
        r + &s * s.transpose() * (t / (2.0 * PI * kr.cfg.d()))
    } else {
        kr.at_depth(t)?
    };
    let (vals, vecs) = sorted_eigen(lam.clone());
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()));
    // ‖Λ‖ alone vanishes with the null direction (always for one center)
    let amax = kr.perts.iter().map(|p| p.alpha.abs()).fold(0.0, f64::max);
    let norm = lam.norm().max(1.0 + amax);
    let mut vectors = Vec::with_capacity(mult);
    let mut residual: f64 = 0.0;
    for &i in idx.iter().take(mult) {
        let mut v: DVector<f64> = vecs.column(i).into_owned();
        // deterministic sign: largest component positive
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        residual = residual.max((&lam * &v).norm() / (norm * v.norm()));
        vectors.push(kr.embed(&v));
    }
    Ok(Eigenvalue { z: kr.cfg.threshold(1) - t.exp(), ln_gap: t, multiplicity: mult, vectors, residual })
}

fn trace_branches(kr: &RealKrein, lo: f64, hi: f64, evals: usize) -> Result<Diagnostics> {
    let n = DIAGNOSTIC_POINTS;
    let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let branches = grid
        .par_iter()
        .map(|&z| -> Result<Vec<f64>> {
            let (vals, _) = sorted_eigen(kr.at_depth(t_of(z, kr.cfg))?);
            Ok(vals.iter().copied().collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Diagnostics { grid, branches, count_evaluations: evals })
}

/// Bound state ψ(x) = Σ_j d_j G₀(x, a_j; z).
pub fn eigenfunction_n(
    x: [f64; 3],
    z: &Energy,
    coeffs: &[f64],
    perts: &[Perturbation],
    cfg: &LayerConfig,
) -> Result<Complex64> {
    if coeffs.len() != perts.len() {
        return domain("coefficient vector and perturbation list differ in length");
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (c, p) in coeffs.iter().zip(perts) {
        if *c == 0.0 {
            if x == p.point() {
                return Err(Error::Singular("eigenfunction at a perturbation point".into()));
            }
            continue;
        }
        sum += *c * free_green(x, p.point(), z, cfg)?;
    }
    Ok(sum)
}

/// Energy of an eigenvalue in the form the Green's function routines expect.
pub fn eigen_energy(ev: &Eigenvalue, cfg: &LayerConfig) -> Energy {
    energy_at_depth(cfg, ev.ln_gap)
}

/// Roots of vᵀ Re Λ(z) v = 0 in a real window, for a fixed vector v that
/// spans an invariant sector of Λ (e.g. the antisymmetric combination of a
/// mirror-symmetric vertical pair). The window may extend above E_1 as long
/// as the sector stays real there.
pub fn sector_roots(perts: &[Perturbation], v: &[f64], cfg: &LayerConfig, window: (f64, f64)) -> Result<Vec<f64>> {
    validate_all(perts, cfg)?;
    if v.len() != perts.len() {
        return domain("sector vector and perturbation list differ in length");
    }
    let (lo, hi) = window;
    if !(lo < hi) {
        return domain("empty sector window");
    }
    let vv = DVector::from_column_slice(v);
    let f = |z: f64| -> Result<f64> {
        let m = ModeEnergy::new(&Energy::real(z), cfg)?;
        let lam = krein_entries(perts, &m, cfg).map(|c| c.re);
        Ok(vv.dot(&(lam * &vv)))
    };
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<Option<f64>> = grid.par_iter().map(|&z| f(z).ok()).collect();
    let mut roots = Vec::new();
    for i in 0..n {
        let (Some(fa), Some(fb)) = (vals[i], vals[i + 1]) else { continue };
        if fa == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        let (mut a, mut b, mut fa) = (grid[i], grid[i + 1], fa);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = f(m)?;
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    Ok(roots)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedReport {
    pub open_channels: usize,
    /// max over groups of identical planar position of |Σ_j d_j χ_n(b_j)|, per open n
    pub per_mode: Vec<f64>,
    pub max_violation: f64,
}

/// Orthogonality test for a candidate embedded eigenvalue: its
/// eigenfunction has no component in any open channel.
pub fn certify_embedded(z: f64, coeffs: &[f64], perts: &[Perturbation], cfg: &LayerConfig) -> Result<EmbeddedReport> {
    if coeffs.len() != perts.len() {
        return domain("coefficient vector and perturbation list differ in length");
    }
    let open = cfg.open_channels(z);
    let mut groups: Vec<([f64; 2], Vec<usize>)> = Vec::new();
    for (j, p) in perts.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == p.a) {
            Some(g) => g.1.push(j),
            None => groups.push((p.a, vec![j])),
        }
    }
    let per_mode: Vec<f64> = (1..=open as u32)
        .map(|n| {
            groups
                .iter()
                .map(|(_, idx)| idx.iter().map(|&j| coeffs[j] * cfg.transverse(n, perts[j].b)).sum::<f64>().abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let max_violation = per_mode.iter().copied().fold(0.0, f64::max);
    Ok(EmbeddedReport { open_channels: open, per_mode, max_violation })
}

/// −16π²α_j² for each center.
pub fn strong_coupling_n(alphas: &[f64]) -> Result<Vec<f64>> {
    alphas
        .iter()
        .map(|&a| {
            if a < 0.0 {
                Ok(-16.0 * PI * PI * a * a)
            } else {
                domain(format!("strong coupling needs negative couplings, got {a}"))
            }
        })
        .collect()
}

/// ln(E_1 − ε) = ln E_1 − 2πd (Σ_j sin²(πb_j/d)/α_j)⁻¹.
pub fn weak_coupling_n_ln_gap(perts: &[Perturbation], cfg: &LayerConfig) -> Result<f64> {
    let mut h = 0.0;
    for p in perts {
        if !(p.alpha > 0.0) {
            return domain(format!("weak coupling needs positive couplings, got {}", p.alpha));
        }
        cfg.check_b(p.b, "b")?;
        let s = (PI * p.b / cfg.d()).sin();
        h += s * s / p.alpha;
    }
    if perts.is_empty() {
        return domain("no perturbations");
    }
    Ok(cfg.threshold(1).ln() - 2.0 * PI * cfg.d() / h)
}

pub fn weak_coupling_n(perts: &[Perturbation], cfg: &LayerConfig) -> Result<f64> {
    Ok(cfg.threshold(1) - weak_coupling_n_ln_gap(perts, cfg)?.exp())
}

/// Weak-coupling eigenfunction near the centers with coefficients d_j ∝ s_1(b_j):
/// s_1(y)[Σs_j²/Σ(s_j²/α_j) − (1/πd) Σ s_j² ln ρ_j]
/// + (1/πd) Σ_{n≥2} s_n(y) Σ_j s_1(b_j) s_n(b_j) K₀(√(E_n − E_1) ρ_j).
pub fn weak_coupling_n_eigenfunction(x: [f64; 3], perts: &[Perturbation], cfg: &LayerConfig) -> Result<f64> {
    weak_coupling_n_ln_gap(perts, cfg)?;
    let d = cfg.d();
    let s = |n: u32, y: f64| (PI * n as f64 * y / d).sin();
    let rhos: Vec<f64> = perts.iter().map(|p| (x[0] - p.a[0]).hypot(x[1] - p.a[1])).collect();
    if rhos.iter().any(|&r| !(r > 0.0)) {
        return domain("weak-coupling form needs x off every perturbation axis");
    }
    let (mut num, mut den, mut logs) = (0.0, 0.0, 0.0);
    for (p, r) in perts.iter().zip(&rhos) {
        let s1 = s(1, p.b);
        num += s1 * s1;
        den += s1 * s1 / p.alpha;
        logs += s1 * s1 * r.ln();
    }
    let mut v = s(1, x[2]) * (num / den - logs / (PI * d));
    let e1 = cfg.threshold(1);
    let mut tail = 0.0;
    for n in 2u32.. {
        let kn = (cfg.threshold(n) - e1).sqrt();
        let mut inner = 0.0;
        let mut biggest: f64 = 0.0;
        for (p, r) in perts.iter().zip(&rhos) {
            let k = crate::specfun::k0(kn * r);
            biggest = biggest.max(k);
            inner += s(1, p.b) * s(n, p.b) * k;
        }
        tail += s(n, x[2]) * inner;
        if biggest < 1e-18 * tail.abs().max(1e-300) || n > 1_000_000 {
            break;
        }
    }
    v += tail / (PI * d);
    Ok(v)
}
