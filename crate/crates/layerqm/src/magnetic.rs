//! The layer in a homogeneous field B perpendicular to it, symmetric gauge.
//!
//! Thresholds are z₀(m, n) = |B|(2m+1) + E_n. Between consecutive ones the
//! regularized Green's function ξ_B is real and increasing.

use crate::error::{domain, Error, Result};
use crate::layer_green::{
    free_green, series_terms, sine_pair_sums, validate_all, xi, xi2, Energy, KreinMatrix, LayerConfig, Perturbation,
    ScaleMap,
};
use crate::specfun::{laguerre, psi, psi1, psi_minus_ln, w1};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Essential points closer than this (relative) form one degenerate point.
const GROUP_TOL: f64 = 1e-9;
/// Guard band at gap endpoints, relative to 1 + |z₀|.
const GUARD: f64 = 1e-6;
/// Finest guard tried when an eigenvalue hides inside the default band.
const GUARD_MIN: f64 = 1e-14;
pub const GAP_SCAN_POINTS: usize = 1000;
const ROOT_CLUSTER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticConfig {
    b: f64,
    layer: LayerConfig,
}

impl MagneticConfig {
    pub fn new(b: f64, d: f64) -> Result<Self> {
        if b == 0.0 || !b.is_finite() {
            return domain(format!("field must be finite and nonzero, got {b}"));
        }
        Ok(Self { b, layer: LayerConfig::new(d)? })
    }

    pub fn from_layer(b: f64, layer: LayerConfig) -> Result<Self> {
        Self::new(b, layer.d())
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn abs_b(&self) -> f64 {
        self.b.abs()
    }

    pub fn layer(&self) -> &LayerConfig {
        &self.layer
    }

    pub fn d(&self) -> f64 {
        self.layer.d()
    }

    /// Landau level m on top of transverse mode n.
    pub fn threshold(&self, m: u32, n: u32) -> f64 {
        self.abs_b() * (2.0 * m as f64 + 1.0) + self.layer.threshold(n)
    }

    pub fn scaled(&self, s: &ScaleMap) -> MagneticConfig {
        Self { b: s.field(self.b), layer: s.config(&self.layer) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssentialPoint {
    pub value: f64,
    /// Contributing (m, n) pairs, m ≥ 0, n ≥ 1.
    pub indices: Vec<(u32, u32)>,
}

impl EssentialPoint {
    /// Σ_J sin²(πn_j b/d): the pole strength of ξ_B at this point up to |B|/πd.
    pub fn weight(&self, b: f64, cfg: &MagneticConfig) -> f64 {
        let d = cfg.d();
        self.indices.iter().map(|&(_, n)| (PI * n as f64 * b / d).sin().powi(2)).sum()
    }
}

pub fn essential_spectrum(cfg: &MagneticConfig, z_max: f64) -> Result<Vec<EssentialPoint>> {
    if !z_max.is_finite() {
        return domain(format!("z_max must be finite, got {z_max}"));
    }
    let mut raw: Vec<(f64, (u32, u32))> = Vec::new();
    let mut n = 1u32;
    while cfg.threshold(0, n) <= z_max {
        let mut m = 0u32;
        while cfg.threshold(m, n) <= z_max {
            raw.push((cfg.threshold(m, n), (m, n)));
            m += 1;
        }
        n += 1;
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<EssentialPoint> = Vec::new();
    for (v, mn) in raw {
        if let Some(last) = out.last_mut() {
            if (v - last.value).abs() <= GROUP_TOL * (1.0 + last.value.abs()) {
                last.indices.push(mn);
                continue;
            }
        }
        out.push(EssentialPoint { value: v, indices: vec![mn] });
    }
    Ok(out)
}

/// Gap r: (−∞, P₀) for r = 0, (P_{r−1}, P_r) otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub index: usize,
    pub left: Option<EssentialPoint>,
    pub right: EssentialPoint,
}

impl Gap {
    pub fn lo(&self) -> f64 {
        self.left.as_ref().map_or(f64::NEG_INFINITY, |p| p.value)
    }

    pub fn hi(&self) -> f64 {
        self.right.value
    }

    pub fn contains(&self, z: f64) -> bool {
        z > self.lo() && z < self.hi()
    }
}

/// The first `count` gaps.
pub fn gaps(cfg: &MagneticConfig, count: usize) -> Vec<Gap> {
    let step = 2.0 * cfg.abs_b() + cfg.layer.threshold(1);
    let mut z_max = cfg.threshold(0, 1) + step * count as f64;
    let pts = loop {
        let p = essential_spectrum(cfg, z_max).unwrap_or_default();
        if p.len() > count {
            break p;
        }
        z_max += step;
    };
    (0..count)
        .map(|r| Gap { index: r, left: if r == 0 { None } else { Some(pts[r - 1].clone()) }, right: pts[r].clone() })
        .collect()
}

fn check_off_spectrum(z: f64, cfg: &MagneticConfig) -> Result<()> {
    if !z.is_finite() {
        return domain(format!("energy must be finite, got {z}"));
    }
    let bb = cfg.abs_b();
    let mut n = 1u32;
    while cfg.threshold(0, n) <= z + 1.0 {
        let m = ((z - cfg.layer.threshold(n)) / bb - 1.0) / 2.0;
        let m = m.round().max(0.0) as u32;
        let z0 = cfg.threshold(m, n);
        if (z - z0).abs() <= 8.0 * f64::EPSILON * (1.0 + z0.abs()) {
            return Err(Error::Threshold(z));
        }
        n += 1;
    }
    Ok(())
}

/// v_n = (|B| − z + E_n)/(2|B|), the first index of U in mode n.
fn landau_index(n: u32, z: f64, cfg: &MagneticConfig) -> f64 {
    let bb = cfg.abs_b();
    (bb - z + cfg.layer.threshold(n)) / (2.0 * bb)
}

/// T_n = ln(E_n/2|B|) − ψ(v_n), written so that the O(n⁻²) size of the term
/// is not the difference of two large logarithms.
fn mode_term(n: u32, z: f64, cfg: &MagneticConfig) -> f64 {
    let bb = cfg.abs_b();
    let e = cfg.layer.threshold(n);
    let v = landau_index(n, z, cfg);
    if v > 0.0 {
        -((bb - z) / e).ln_1p() - psi_minus_ln(v)
    } else {
        (e / (2.0 * bb)).ln() - psi(v)
    }
}

/// Σ_n T_n sin(nβ₁) sin(nβ₂), with T_n ≈ zc/n² + (z²/2 − B²/6)c²/n⁴ summed
/// in closed form.
fn t_series(z: f64, beta1: f64, beta2: f64, cfg: &MagneticConfig) -> f64 {
    let c = (cfg.d() / PI).powi(2);
    let bb = cfg.abs_b();
    let (q2, q4) = sine_pair_sums(beta1, beta2);
    let t2 = z * c;
    let t4 = (0.5 * z * z - bb * bb / 6.0) * c * c;
    let nmax = series_terms(2.0 * (z.abs() + bb) * c);
    let mut s = 0.0;
    for n in 1..=nmax {
        let nf = n as f64;
        let n2 = nf * nf;
        let ss = (nf * beta1).sin() * (nf * beta2).sin();
        s += ss * (mode_term(n as u32, z, cfg) - t2 / n2 - t4 / (n2 * n2));
    }
    s + t2 * q2 + t4 * q4
}

/// For z < 0: Σ_n [T_n − T_n⁰] sin(nβ₁) sin(nβ₂) where T_n⁰ = −ln(1 − z/E_n)
/// is the field-free summand. The difference is −ln(1 + |B|/u) − (ψ − ln)(v)
/// with u = E_n − z and behaves as −B²/(6u²), so it carries no large
/// cancellation at very negative z, where the field-free part is taken from
/// the plain layer.
fn field_correction(z: f64, beta1: f64, beta2: f64, cfg: &MagneticConfig) -> f64 {
    let c = (cfg.d() / PI).powi(2);
    let bb = cfg.abs_b();
    let (_, q4) = sine_pair_sums(beta1, beta2);
    let t4 = -bb * bb / 6.0 * c * c;
    let nmax = series_terms(2.0 * (z.abs() + bb) * c);
    let mut s = 0.0;
    for n in 1..=nmax {
        let nf = n as f64;
        let n2 = nf * nf;
        let ss = (nf * beta1).sin() * (nf * beta2).sin();
        let u = cfg.layer.threshold(n as u32) - z;
        let dn = -(bb / u).ln_1p() - psi_minus_ln(landau_index(n as u32, z, cfg));
        s += ss * (dn - t4 / (n2 * n2));
    }
    s + t4 * q4
}

/// ξ_B(b; z) = (1/2πd) Σ_n [ln(E_n/2|B|) − ψ(v_n)] sin²(πnb/d) + ξ₂(b).
pub fn xi_b(b: f64, z: f64, cfg: &MagneticConfig) -> Result<f64> {
    cfg.layer.check_b(b, "transverse position b")?;
    check_off_spectrum(z, cfg)?;
    let d = cfg.d();
    let beta = PI * b / d;
    if z < 0.0 {
        let plain = xi(b, &Energy::real(z), &cfg.layer)?.re;
        return Ok(plain + field_correction(z, beta, beta, cfg) / (2.0 * PI * d));
    }
    Ok(t_series(z, beta, beta, cfg) / (2.0 * PI * d) + xi2(b, d)?)
}

/// dξ_B/dz = (1/4πd|B|) Σ_n ψ′(v_n) sin²(πnb/d).
pub fn dxi_b_dz(b: f64, z: f64, cfg: &MagneticConfig) -> Result<f64> {
    cfg.layer.check_b(b, "transverse position b")?;
    check_off_spectrum(z, cfg)?;
    let d = cfg.d();
    let c = (d / PI).powi(2);
    let bb = cfg.abs_b();
    let beta = PI * b / d;
    let (q2, q4) = sine_pair_sums(beta, beta);
    let nmax = series_terms(2.0 * (z.abs() + bb) * c);
    let mut s = 0.0;
    for n in 1..=nmax {
        let nf = n as f64;
        let n2 = nf * nf;
        let s2 = (nf * beta).sin().powi(2);
        let t = psi1(landau_index(n as u32, z, cfg)) / (2.0 * bb);
        s += s2 * (t - c / n2 - z * c * c / (n2 * n2));
    }
    Ok((s + c * q2 + z * c * c * q4) / (2.0 * PI * d))
}

/// Symmetric-gauge factor e^{(iB/2)(−x₁x₂′ + x₂x₁′) − |B|ρ²/4}.
pub fn gauge_phase(x: [f64; 2], xp: [f64; 2], cfg: &MagneticConfig) -> Complex64 {
    let rho2 = (x[0] - xp[0]).powi(2) + (x[1] - xp[1]).powi(2);
    let phase = 0.5 * cfg.b * (-x[0] * xp[1] + x[1] * xp[0]);
    Complex64::from_polar((-0.25 * cfg.abs_b() * rho2).exp(), phase)
}

/// Σ_n Γ(v_n) U(v_n, 1; |B|ρ²/2) sin(πny₁/d) sin(πny₂/d) for ρ > 0.
fn landau_mode_sum(rho: f64, y1: f64, y2: f64, z: f64, cfg: &MagneticConfig) -> f64 {
    let d = cfg.d();
    let x = 0.5 * cfg.abs_b() * rho * rho;
    let mut sum = 0.0;
    let mut scale: f64 = 0.0;
    let mut n = 1u32;
    loop {
        let v = landau_index(n, z, cfg);
        let w = w1(v, x);
        let nf = n as f64;
        sum += w * (PI * nf * y1 / d).sin() * (PI * nf * y2 / d).sin();
        scale = scale.max(w.abs());
        // W(v, x) decreases in v > 0, so the first negligible value ends the sum
        if v > 1.0 && w.abs() <= 1e-17 * scale.max(sum.abs()) || n >= 2_000_000 {
            break;
        }
        n += 1;
    }
    sum
}

/// Free magnetic Green's function G^B(x₁, x₂; z), z real off the essential
/// spectrum.
pub fn free_green_b(x1: [f64; 3], x2: [f64; 3], z: f64, cfg: &MagneticConfig) -> Result<Complex64> {
    let d = cfg.d();
    for y in [x1[2], x2[2]] {
        if !(0.0..=d).contains(&y) {
            return domain(format!("transverse coordinate {y} outside [0, {d}]"));
        }
    }
    check_off_spectrum(z, cfg)?;
    if x1 == x2 {
        return Err(Error::Singular("free_green_b at coinciding points".into()));
    }
    if x1[2] == 0.0 || x1[2] == d || x2[2] == 0.0 || x2[2] == d {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rho = (x1[0] - x2[0]).hypot(x1[1] - x2[1]);
    if rho == 0.0 {
        return Ok(Complex64::new(vertical_green(x1[2], x2[2], z, cfg)?, 0.0));
    }
    let s = landau_mode_sum(rho, x1[2], x2[2], z, cfg);
    Ok(gauge_phase([x1[0], x1[1]], [x2[0], x2[1]], cfg) * (s / (2.0 * PI * d)))
}

/// ρ = 0 limit for y₁ ≠ y₂: the K₀ part of the mode sum gives ξ₂ at the
/// half-sum and half-difference.
fn vertical_green(y1: f64, y2: f64, z: f64, cfg: &MagneticConfig) -> Result<f64> {
    let d = cfg.d();
    if z < 0.0 {
        let plain = free_green([0.0, 0.0, y1], [0.0, 0.0, y2], &Energy::real(z), &cfg.layer)?.re;
        return Ok(plain + field_correction(z, PI * y1 / d, PI * y2 / d, cfg) / (2.0 * PI * d));
    }
    let t = t_series(z, PI * y1 / d, PI * y2 / d, cfg) / (2.0 * PI * d);
    Ok(t + xi2(0.5 * (y1 + y2), d)? - xi2(0.5 * (y1 - y2).abs(), d)?)
}

fn validate_magnetic(perts: &[Perturbation], cfg: &MagneticConfig) -> Result<()> {
    validate_all(perts, &cfg.layer)?;
    if perts.iter().any(|p| !p.is_active()) {
        return Err(Error::Config("every magnetic perturbation needs a finite coupling".into()));
    }
    Ok(())
}

fn entries_b(perts: &[Perturbation], z: f64, cfg: &MagneticConfig) -> Result<DMatrix<Complex64>> {
    let n = perts.len();
    let mut lam = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        let pj = &perts[j];
        lam[(j, j)] = Complex64::new(pj.alpha - xi_b(pj.b, z, cfg)?, 0.0);
        for m in 0..j {
            let g = free_green_b(perts[m].point(), pj.point(), z, cfg)?;
            lam[(m, j)] = -g;
            lam[(j, m)] = -g.conj();
        }
    }
    Ok(lam)
}

/// Λ_B(z): diagonal α_j − ξ_B(b_j; z), off-diagonal −G^B(a_m, a_j; z).
/// Hermitian for real z.
pub fn krein_matrix_b(perts: &[Perturbation], z: f64, cfg: &MagneticConfig) -> Result<KreinMatrix> {
    validate_magnetic(perts, cfg)?;
    Ok(KreinMatrix::from_parts(entries_b(perts, z, cfg)?, Energy::real(z), perts.to_vec()))
}

/// Eigenvalues of a Hermitian matrix, ascending, with eigenvectors.
fn hermitian_eigen(m: DMatrix<Complex64>) -> (Vec<f64>, Vec<DVector<Complex64>>) {
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    (
        idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
        idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect(),
    )
}

fn neg_count(perts: &[Perturbation], z: f64, cfg: &MagneticConfig) -> Result<usize> {
    let (vals, _) = hermitian_eigen(entries_b(perts, z, cfg)?);
    Ok(vals.iter().filter(|&&v| v < 0.0).count())
}

/// Lower end for gap 0 where Λ_B is positive definite; ξ_B ≈ −√(−z)/4π
/// far below.
fn deep_energy(perts: &[Perturbation], gap: &Gap, cfg: &MagneticConfig) -> Result<f64> {
    let amin = perts.iter().map(|p| p.alpha).fold(0.0, f64::min);
    let mut z = (gap.hi() - 1.0).min(-(4.0 * PI * amin).powi(2) - 1.0);
    for _ in 0..200 {
        if neg_count(perts, z, cfg)? == 0 {
            return Ok(z);
        }
        z = 2.0 * z - 1.0;
    }
    Err(Error::Singular("Krein matrix stays indefinite at large negative energy".into()))
}

/// Root of ξ_B(b; z) = α inside the gap. `None` only when the root is pushed
/// onto an endpoint the centre does not couple to.
pub fn gap_eigenvalue_single(pert: &Perturbation, gap: &Gap, cfg: &MagneticConfig) -> Result<Option<f64>> {
    validate_magnetic(std::slice::from_ref(pert), cfg)?;
    let f = |z: f64| xi_b(pert.b, z, cfg).map(|x| x - pert.alpha);
    let mut lo = match &gap.left {
        None => {
            let mut z = (gap.hi() - 1.0).min(-(4.0 * PI * pert.alpha.min(0.0)).powi(2) - 1.0);
            let mut ok = false;
            for _ in 0..200 {
                if f(z)? < 0.0 {
                    ok = true;
                    break;
                }
                z = 2.0 * z - 1.0;
            }
            if !ok {
                return Ok(None);
            }
            z
        }
        Some(p) => match guarded_end(p.value, 1.0, |z| Ok(f(z)? < 0.0))? {
            Some(z) => z,
            None => return Ok(None),
        },
    };
    let mut hi = match guarded_end(gap.hi(), -1.0, |z| Ok(f(z)? > 0.0))? {
        Some(z) => z,
        None => return Ok(None),
    };
    // safeguarded Newton on the increasing function f; near the poles Newton
    // creeps, so a bisection step is forced whenever the bracket stalls
    let mut z = 0.5 * (lo + hi);
    let mut widths = [f64::INFINITY; 2];
    for _ in 0..300 {
        let fz = f(z)?;
        if fz == 0.0 {
            return Ok(Some(z));
        }
        if fz < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + z.abs()) {
            break;
        }
        let stalled = hi - lo > 0.5 * widths[0];
        widths = [widths[1], hi - lo];
        let step = fz / dxi_b_dz(pert.b, z, cfg)?;
        let zn = z - step;
        if zn > lo && zn < hi && !stalled {
            if step.abs() <= 1e-15 * (1.0 + zn.abs()) {
                return Ok(Some(zn));
            }
            z = zn;
        } else {
            z = 0.5 * (lo + hi);
        }
    }
    Ok(Some(z))
}

/// Point inside the gap at the guard distance from z₀ on the side `dir`
/// where `ok` holds, tightening the guard down to GUARD_MIN.
fn guarded_end(z0: f64, dir: f64, ok: impl Fn(f64) -> Result<bool>) -> Result<Option<f64>> {
    let mut delta = GUARD * (1.0 + z0.abs());
    while delta >= GUARD_MIN * (1.0 + z0.abs()) {
        let z = z0 + dir * delta;
        if ok(z)? {
            return Ok(Some(z));
        }
        delta /= 100.0;
    }
    Ok(None)
}

/// Solves every listed gap in parallel.
pub fn gap_eigenvalues_single(pert: &Perturbation, gaps: &[Gap], cfg: &MagneticConfig) -> Result<Vec<Option<f64>>> {
    gaps.par_iter().map(|g| gap_eigenvalue_single(pert, g, cfg)).collect()
}

#[derive(Debug, Clone)]
pub struct MagneticEigenvalue {
    pub z: f64,
    pub multiplicity: usize,
    /// Null vectors of Λ_B, the coefficients d_j of Σ d_j G^B(·, a_j).
    pub vectors: Vec<DVector<Complex64>>,
    /// Largest |eigenvalue| of Λ_B among the null vectors, over 1 + max|α_j|.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct MagneticSpectrum {
    pub gap: Gap,
    pub eigenvalues: Vec<MagneticEigenvalue>,
    pub count_evaluations: usize,
}

impl MagneticSpectrum {
    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }
}

/// All roots of det Λ_B = 0 in the gap. The number of negative eigenvalues
/// of Λ_B(z) does not decrease with z inside a gap, and each jump is an
/// eigenvalue of that multiplicity.
pub fn gap_eigenvalues_multi(perts: &[Perturbation], gap: &Gap, cfg: &MagneticConfig) -> Result<MagneticSpectrum> {
    validate_magnetic(perts, cfg)?;
    let mut evals = 0usize;
    let mut count = |z: f64| {
        evals += 1;
        neg_count(perts, z, cfg)
    };
    let (lo, c_lo) = match &gap.left {
        None => {
            let z = deep_energy(perts, gap, cfg)?;
            (z, 0)
        }
        Some(p) => tight_end(p.value, 1.0, &mut count, usize::min)?,
    };
    let (hi, c_hi) = tight_end(gap.hi(), -1.0, &mut count, usize::max)?;
    let mut jumps = Vec::new();
    if c_hi > c_lo {
        bisect_jumps(&mut count, lo, c_lo, hi, c_hi, &mut jumps)?;
    }
    let mut roots: Vec<(f64, usize)> = Vec::new();
    for (z, k) in jumps {
        if let Some(last) = roots.last_mut() {
            if (z - last.0).abs() <= ROOT_CLUSTER_TOL * (1.0 + z.abs()) {
                last.0 = (last.0 * last.1 as f64 + z * k as f64) / (last.1 + k) as f64;
                last.1 += k;
                continue;
            }
        }
        roots.push((z, k));
    }
    let eigenvalues = roots.into_iter().map(|(z, k)| null_space(perts, z, k, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(MagneticSpectrum { gap: gap.clone(), eigenvalues, count_evaluations: evals })
}

/// Count at the guard band and at a 1000× tighter one, keeping whichever
/// sees more of the gap.
fn tight_end(
    z0: f64,
    dir: f64,
    count: &mut impl FnMut(f64) -> Result<usize>,
    pick: fn(usize, usize) -> usize,
) -> Result<(f64, usize)> {
    let wide = z0 + dir * GUARD * (1.0 + z0.abs());
    let narrow = z0 + dir * GUARD * 1e-3 * (1.0 + z0.abs());
    let (cw, cn) = (count(wide)?, count(narrow)?);
    Ok(if pick(cw, cn) == cn { (narrow, cn) } else { (wide, cw) })
}

fn bisect_jumps(
    count: &mut impl FnMut(f64) -> Result<usize>,
    za: f64,
    ca: usize,
    zb: f64,
    cb: usize,
    out: &mut Vec<(f64, usize)>,
) -> Result<()> {
    let mid = 0.5 * (za + zb);
    if mid <= za || mid >= zb || zb - za <= 2.0 * f64::EPSILON * za.abs().max(zb.abs()) {
        out.push((mid, cb - ca));
        return Ok(());
    }
    let cm = count(mid)?.clamp(ca, cb);
    if cm > ca {
        bisect_jumps(count, za, ca, mid, cm, out)?;
    }
    if cb > cm {
        bisect_jumps(count, mid, cm, zb, cb, out)?;
    }
    Ok(())
}

fn null_space(perts: &[Perturbation], z: f64, mult: usize, cfg: &MagneticConfig) -> Result<MagneticEigenvalue> {
    let lam = entries_b(perts, z, cfg)?;
    // Λ_B itself can be tiny at a deep root, so measure against the couplings
    let norm = 1.0 + perts.iter().map(|p| p.alpha.abs()).fold(0.0, f64::max);
    let (vals, vecs) = hermitian_eigen(lam);
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()));
    let chosen = &idx[..mult.min(idx.len())];
    Ok(MagneticEigenvalue {
        z,
        multiplicity: mult,
        vectors: chosen.iter().map(|&i| vecs[i].clone()).collect(),
        residual: chosen.iter().map(|&i| vals[i].abs()).fold(0.0, f64::max) / norm,
    })
}

/// Eigenvalues of Λ_B(z) on `points` energies spread over the gap between
/// the guard bands; gap 0 starts at `lo_gap0`.
pub fn lambda_branches_b(
    perts: &[Perturbation],
    gap: &Gap,
    points: usize,
    lo_gap0: f64,
    cfg: &MagneticConfig,
) -> Result<Vec<(f64, Vec<f64>)>> {
    validate_magnetic(perts, cfg)?;
    if points < 2 {
        return domain("branch trace needs at least two points");
    }
    let lo = match &gap.left {
        None => lo_gap0,
        Some(p) => p.value + GUARD * (1.0 + p.value.abs()),
    };
    let hi = gap.hi() - GUARD * (1.0 + gap.hi().abs());
    if !(lo < hi) {
        return domain(format!("empty scan interval ({lo}, {hi})"));
    }
    (0..points)
        .into_par_iter()
        .map(|i| {
            let z = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            Ok((z, hermitian_eigen(entries_b(perts, z, cfg)?).0))
        })
        .collect()
}

/// Write Λ_B = ᾱI − M(z) with the couplings of `perts` playing the role of
/// α̃. The sorted eigenvalues of M increase through the gap, so ᾱ yields a
/// root there iff it lies in the range of some branch. Returns the interior
/// holes between those ranges: for ᾱ in a hole the gap has no eigenvalue.
pub fn empty_gap_intervals(perts: &[Perturbation], gap: &Gap, cfg: &MagneticConfig) -> Result<Vec<(f64, f64)>> {
    validate_magnetic(perts, cfg)?;
    let left = gap.left.as_ref().ok_or_else(|| Error::Config("the lowest gap is unbounded below".into()))?;
    let tight = GUARD * 1e-3;
    let m_eigs = |z: f64| -> Result<Vec<f64>> {
        let mut v: Vec<f64> = hermitian_eigen(entries_b(perts, z, cfg)?).0.iter().map(|x| -x).collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    };
    let low = m_eigs(left.value + tight * (1.0 + left.value.abs()))?;
    let high = m_eigs(gap.hi() - tight * (1.0 + gap.hi().abs()))?;
    let mut ranges: Vec<(f64, f64)> = low.into_iter().zip(high).collect();
    ranges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut holes = Vec::new();
    let mut reach = ranges[0].1;
    for &(a, b) in &ranges[1..] {
        if a > reach {
            holes.push((reach, a));
        }
        reach = reach.max(b);
    }
    Ok(holes)
}

/// Unnormalized eigenfunction G^B(x, a; ε) of a single centre.
pub fn eigenfunction_b(x: [f64; 3], eps: f64, pert: &Perturbation, cfg: &MagneticConfig) -> Result<Complex64> {
    free_green_b(x, pert.point(), eps, cfg)
}

/// Σ_j d_j G^B(x, a_j; ε).
pub fn eigenfunction_b_n(
    x: [f64; 3],
    eps: f64,
    coeffs: &DVector<Complex64>,
    perts: &[Perturbation],
    cfg: &MagneticConfig,
) -> Result<Complex64> {
    if coeffs.len() != perts.len() {
        return domain("one coefficient per perturbation expected");
    }
    let mut s = Complex64::new(0.0, 0.0);
    for (c, p) in coeffs.iter().zip(perts) {
        s += c * free_green_b(x, p.point(), eps, cfg)?;
    }
    Ok(s)
}

/// ε ≈ z₀ − (1/α)(|B|/πd) Σ_J sin²(πn_j b/d) for the eigenvalue next to z₀
/// (below it for α → +∞, above it for α → −∞).
pub fn weak_coupling_b(alpha: f64, pert: &Perturbation, point: &EssentialPoint, cfg: &MagneticConfig) -> f64 {
    point.value - cfg.abs_b() / (PI * cfg.d()) * point.weight(pert.b, cfg) / alpha
}

/// Lowest eigenvalue for α → −∞: −16π²α², as without the field.
pub fn strong_coupling_b(alpha: f64) -> f64 {
    -16.0 * PI * PI * alpha * alpha
}

/// Leading shape for |α| → ∞ next to z₀:
/// α/Σ_J sin² · Φ^B · Σ_J L_{m_j}(|B|ρ²/2) sin(πn_j b/d) sin(πn_j y/d).
pub fn laguerre_eigenfunction(
    x: [f64; 3],
    alpha: f64,
    pert: &Perturbation,
    point: &EssentialPoint,
    cfg: &MagneticConfig,
) -> Complex64 {
    let d = cfg.d();
    let rho2 = (x[0] - pert.a[0]).powi(2) + (x[1] - pert.a[1]).powi(2);
    let u = 0.5 * cfg.abs_b() * rho2;
    let s: f64 = point
        .indices
        .iter()
        .map(|&(m, n)| {
            let nf = n as f64;
            laguerre(m, u) * (PI * nf * pert.b / d).sin() * (PI * nf * x[2] / d).sin()
        })
        .sum();
    gauge_phase([x[0], x[1]], pert.a, cfg) * (alpha / point.weight(pert.b, cfg) * s)
}

/// Strongly localized shape of the lowest eigenfunction for α → −∞:
/// (1/d) Φ^B Σ_n (2πK_nρ)^{−1/2} e^{−K_nρ} sin(πny/d) sin(πnb/d),
/// K_n = √(|B| + 16π²α² + E_n).
pub fn strong_eigenfunction_b(x: [f64; 3], alpha: f64, pert: &Perturbation, cfg: &MagneticConfig) -> Result<Complex64> {
    let d = cfg.d();
    let rho = (x[0] - pert.a[0]).hypot(x[1] - pert.a[1]);
    if rho == 0.0 {
        return Err(Error::Singular("strong-coupling shape on the perturbation axis".into()));
    }
    let base = cfg.abs_b() + 16.0 * PI * PI * alpha * alpha;
    let mut s = 0.0;
    for n in 1u32.. {
        let k = (base + cfg.layer.threshold(n)).sqrt();
        let e = (-k * rho).exp();
        let nf = n as f64;
        s += e / (2.0 * PI * k * rho).sqrt() * (PI * nf * x[2] / d).sin() * (PI * nf * pert.b / d).sin();
        if k * rho > 745.0 || (e == 0.0 && n > 1) {
            break;
        }
    }
    Ok(gauge_phase([x[0], x[1]], pert.a, cfg) * (s / d))
}
