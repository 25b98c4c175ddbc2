//! Free resolvent of the Dirichlet layer ℝ² × [0, d], the regularized
//! Green's function ξ and the Krein matrix Λ of N point interactions.
//!
//! Units: ħ = 2m = 1. Transverse modes χ_n(y) = √(2/d) sin(πny/d) with
//! thresholds E_n = (πn/d)².

use crate::error::{domain, Error, Result};
use crate::specfun::{self, psi, EULER_GAMMA};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this value of κd the mode series is used; above it the image sum.
const IMAGE_REGIME_KD: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerConfig {
    d: f64,
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self { d: PI }
    }
}

impl LayerConfig {
    pub fn new(d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Config(format!("layer width must be positive, got {d}")));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// E_n = (πn/d)².
    pub fn threshold(&self, n: u32) -> f64 {
        let p = PI * n as f64 / self.d;
        p * p
    }

    pub(crate) fn c(&self) -> f64 {
        let r = self.d / PI;
        r * r
    }

    pub fn transverse(&self, n: u32, y: f64) -> f64 {
        (2.0 / self.d).sqrt() * (PI * n as f64 * y / self.d).sin()
    }

    /// Number of open channels at real energy z (modes with E_n < z).
    pub fn open_channels(&self, z: f64) -> usize {
        if z <= 0.0 {
            return 0;
        }
        let mut n = (z.sqrt() * self.d / PI).floor() as u32;
        while n > 0 && self.threshold(n) >= z {
            n -= 1;
        }
        while self.threshold(n + 1) < z {
            n += 1;
        }
        n as usize
    }

    pub(crate) fn check_b(&self, b: f64, what: &str) -> Result<()> {
        let guard = 1e-9 * self.d;
        if !(b > guard && b < self.d - guard) {
            return domain(format!("{what} = {b} must lie inside (0, d) with d = {}", self.d));
        }
        Ok(())
    }
}

/// A point interaction at (a, b) with coupling α; α = +∞ switches it off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub a: [f64; 2],
    pub b: f64,
    pub alpha: f64,
}

impl Perturbation {
    pub fn new(a: [f64; 2], b: f64, alpha: f64) -> Self {
        Self { a, b, alpha }
    }

    pub fn point(&self) -> [f64; 3] {
        [self.a[0], self.a[1], self.b]
    }

    pub fn is_active(&self) -> bool {
        self.alpha != f64::INFINITY
    }

    pub fn validate(&self, cfg: &LayerConfig) -> Result<()> {
        cfg.check_b(self.b, "transverse position b")?;
        if !self.a[0].is_finite() || !self.a[1].is_finite() {
            return domain("planar position must be finite");
        }
        if self.alpha.is_nan() || self.alpha == f64::NEG_INFINITY {
            return domain(format!("coupling must be real or +inf, got {}", self.alpha));
        }
        Ok(())
    }
}

pub(crate) fn validate_all(perts: &[Perturbation], cfg: &LayerConfig) -> Result<()> {
    for (j, p) in perts.iter().enumerate() {
        p.validate(cfg)?;
        for q in &perts[..j] {
            if p.point() == q.point() {
                return Err(Error::Config(format!("two perturbations share the point {:?}", p.point())));
            }
        }
    }
    Ok(())
}

/// Spectral parameter. Real values are boundary values from the upper
/// half-plane, so k_n(z) = √(z − E_n) has Im k_n ≥ 0 and is positive for open
/// channels. Energies extremely close below E_1 are kept as ln(E_1 − z),
/// which stays meaningful long after E_1 − z underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    z: Complex64,
    ln_depth: Option<f64>,
}

impl Energy {
    pub fn real(z: f64) -> Self {
        Self { z: Complex64::new(z, 0.0), ln_depth: None }
    }

    pub fn complex(z: Complex64) -> Self {
        Self { z, ln_depth: None }
    }

    /// z = E_1 − e^{ln_depth}.
    pub fn below_threshold(cfg: &LayerConfig, ln_depth: f64) -> Self {
        let z = cfg.threshold(1) - ln_depth.exp();
        Self { z: Complex64::new(z, 0.0), ln_depth: Some(ln_depth) }
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn re(&self) -> f64 {
        self.z.re
    }

    pub fn ln_depth(&self) -> Option<f64> {
        self.ln_depth
    }

    pub fn is_real(&self) -> bool {
        self.z.im == 0.0
    }

    pub fn is_below_threshold(&self, cfg: &LayerConfig) -> bool {
        self.is_real() && (self.ln_depth.is_some() || self.z.re < cfg.threshold(1))
    }
}

/// k_n(z) on the physical sheet.
pub fn k_n(z: &Energy, n: u32, cfg: &LayerConfig) -> Complex64 {
    let m = ModeEnergy::unchecked(z, cfg);
    I * m.kappa(n, cfg)
}

/// Dimensionless view of an energy: w = z (d/π)².
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModeEnergy {
    pub(crate) w: Complex64,
    c: f64,
    /// ln(1 − w) when the energy was given through its depth below E_1
    ln_u1: Option<f64>,
}

impl ModeEnergy {
    pub(crate) fn new(e: &Energy, cfg: &LayerConfig) -> Result<Self> {
        let m = Self::unchecked(e, cfg);
        if m.ln_u1.is_none() && e.is_real() && e.z.re > 0.0 {
            let n = m.w.re.sqrt().round().max(1.0);
            if (m.w.re - n * n).abs() <= 8.0 * f64::EPSILON * n * n {
                return Err(Error::Threshold(e.z.re));
            }
        }
        Ok(m)
    }

    pub(crate) fn unchecked(e: &Energy, cfg: &LayerConfig) -> Self {
        let c = cfg.c();
        Self { w: e.z * c, c, ln_u1: e.ln_depth.map(|t| t + c.ln()) }
    }

    fn is_real(&self) -> bool {
        self.w.im == 0.0
    }

    /// ln(1 − w/n²) as the boundary value from Im z > 0.
    pub(crate) fn log_u(&self, n: usize) -> Complex64 {
        if n == 1 {
            if let Some(l) = self.ln_u1 {
                return Complex64::new(l, 0.0);
            }
        }
        let n2 = (n * n) as f64;
        let x = self.w / n2;
        if self.is_real() {
            let u = 1.0 - x.re;
            if u > 0.0 {
                Complex64::new((-x.re).ln_1p(), 0.0)
            } else {
                Complex64::new((x.re - 1.0).ln(), -PI)
            }
        } else {
            let re1 = 1.0 - x.re;
            let modulus =
                if re1.abs() < 0.5 { re1.hypot(x.im).ln() } else { 0.5 * (x.norm_sqr() - 2.0 * x.re).ln_1p() };
            Complex64::new(modulus, (-x.im).atan2(re1))
        }
    }

    /// n² − w, exact for the first mode when the depth is known.
    pub(crate) fn n2_minus_w(&self, n: usize) -> Complex64 {
        if n == 1 {
            if let Some(l) = self.ln_u1 {
                return Complex64::new(l.exp(), 0.0);
            }
        }
        let n2 = (n * n) as f64;
        if let Some(ln_u1) = self.ln_u1 {
            // w = 1 − u1 with u1 below rounding for n ≥ 2
            return Complex64::new(n2 - 1.0 + ln_u1.exp(), 0.0);
        }
        Complex64::new(n2, 0.0) - self.w
    }

    /// κ_n = √(E_n − z) with Re κ_n ≥ 0; −i√(z − E_n) on open channels.
    pub(crate) fn kappa(&self, n: u32, cfg: &LayerConfig) -> Complex64 {
        let g = self.n2_minus_w(n as usize) / cfg.c();
        if self.is_real() {
            if g.re >= 0.0 {
                Complex64::new(g.re.sqrt(), 0.0)
            } else {
                Complex64::new(0.0, -(-g.re).sqrt())
            }
        } else {
            g.sqrt()
        }
    }

    /// ln κ_1 when the first mode is given by depth.
    fn ln_kappa1(&self) -> Option<f64> {
        self.ln_u1.map(|l| 0.5 * (l - self.c.ln()))
    }

    /// κ = √(−z) when z is real and negative.
    fn free_kappa(&self) -> Option<f64> {
        if self.is_real() && self.ln_u1.is_none() && self.w.re < 0.0 {
            Some((-self.w.re / self.c).sqrt())
        } else {
            None
        }
    }
}

/// Σ_{n≥1} cos(nθ)/n² on [0, 2π].
fn cos_sum2(t: f64) -> f64 {
    PI * PI / 6.0 - 0.5 * PI * t + 0.25 * t * t
}

/// Σ_{n≥1} cos(nθ)/n⁴ on [0, 2π].
fn cos_sum4(t: f64) -> f64 {
    let t2 = t * t;
    PI.powi(4) / 90.0 - PI * PI * t2 / 12.0 + PI * t2 * t / 12.0 - t2 * t2 / 48.0
}

/// Σ sin(nβ₁) sin(nβ₂)/n² and the n⁻⁴ analogue, β ∈ (0, π).
pub(crate) fn sine_pair_sums(b1: f64, b2: f64) -> (f64, f64) {
    let dlt = (b1 - b2).abs();
    let sum = b1 + b2;
    (0.5 * (cos_sum2(dlt) - cos_sum2(sum)), 0.5 * (cos_sum4(dlt) - cos_sum4(sum)))
}

/// Number of exact terms so that the neglected O(w³ n⁻⁶) tail stays below
/// double precision relative to the result.
pub(crate) fn series_terms(wabs: f64) -> usize {
    let tol = 1e-15 * (1.0 + wabs.sqrt());
    let by_tail = (wabs.powi(3) / (30.0 * tol)).powf(0.2);
    let by_modes = 2.0 * wabs.sqrt() + 10.0;
    by_tail.max(by_modes).max(32.0).ceil() as usize
}

/// Σ_n ½ ln(1 − w/n²) sin(nβ₁) sin(nβ₂) with the n⁻², n⁻⁴ parts of the tail
/// summed in closed form. Each term carries its own subtraction so no large
/// partial sums cancel.
pub(crate) fn log_series(m: &ModeEnergy, beta1: f64, beta2: f64) -> Complex64 {
    let (q2, q4) = sine_pair_sums(beta1, beta2);
    let nmax = series_terms(m.w.norm());
    let mut s = Complex64::new(0.0, 0.0);
    for n in 1..=nmax {
        let nf = n as f64;
        let ss = (nf * beta1).sin() * (nf * beta2).sin();
        let x = m.w / (nf * nf);
        s += 0.5 * ss * (m.log_u(n) + x + 0.5 * x * x);
    }
    s - 0.5 * m.w * q2 - 0.25 * m.w * m.w * q4
}

/// Σ_n sin(nβ₁) sin(nβ₂)/(n² − w), accelerated the same way:
/// 1/(n² − w) = 1/n² + w/n⁴ + w²/(n⁴(n² − w)).
pub(crate) fn resolvent_series(m: &ModeEnergy, beta1: f64, beta2: f64) -> Complex64 {
    let (q2, q4) = sine_pair_sums(beta1, beta2);
    let nmax = series_terms(m.w.norm());
    let w2 = m.w * m.w;
    let mut s = Complex64::new(0.0, 0.0);
    for n in 1..=nmax {
        let nf = n as f64;
        let ss = (nf * beta1).sin() * (nf * beta2).sin();
        let n4 = nf * nf * nf * nf;
        s += ss * w2 / (n4 * m.n2_minus_w(n));
    }
    s + q2 + m.w * q4
}

/// Same sum without the first mode, for use with the first mode handled
/// analytically near threshold.
fn resolvent_series_from2(m: &ModeEnergy, beta1: f64, beta2: f64) -> f64 {
    let (q2, q4) = sine_pair_sums(beta1, beta2);
    let nmax = series_terms(m.w.norm());
    let w = m.w.re;
    let mut s = 0.0;
    for n in 2..=nmax {
        let nf = n as f64;
        let ss = (nf * beta1).sin() * (nf * beta2).sin();
        let n4 = nf * nf * nf * nf;
        s += ss * w * w / (n4 * m.n2_minus_w(n).re);
    }
    let s1 = beta1.sin() * beta2.sin();
    s + (q2 - s1) + w * (q4 - s1)
}

/// ξ₂(b, d) = (1/4πd)[γ + ψ(b/d) + (π/2) cot(πb/d)].
pub fn xi2(b: f64, d: f64) -> Result<f64> {
    if !(b > 0.0 && b < d) {
        return domain(format!("xi2 needs 0 < b < d, got b={b}, d={d}"));
    }
    Ok(xi2_unchecked(b, d))
}

fn xi2_unchecked(b: f64, d: f64) -> f64 {
    let r = b / d;
    (EULER_GAMMA + psi(r) + 0.5 * PI / (PI * r).tan()) / (4.0 * PI * d)
}

/// Method of images for real z < 0:
/// G₀ = (1/4π) Σ_k [e^{−κR⁺_k}/R⁺_k − e^{−κR⁻_k}/R⁻_k] with
/// R^±_k = |(ρ, y ∓ y′ − 2kd)|. With `regular` the k = 0 direct term is
/// replaced by its finite part −κ (coinciding points).
fn image_green(rho: f64, y1: f64, y2: f64, kappa: f64, d: f64, regular: bool) -> f64 {
    let term = |t: f64| {
        let r = rho.hypot(t);
        (-kappa * r).exp() / r
    };
    let mut s = if regular { -kappa } else { term(y1 - y2) };
    s -= term(y1 + y2);
    let cut = 42.0 / kappa;
    for k in 1.. {
        let shift = 2.0 * k as f64 * d;
        if shift - 2.0 * d > cut && shift - 2.0 * d > rho {
            break;
        }
        s += term(y1 - y2 + shift) + term(y1 - y2 - shift);
        s -= term(y1 + y2 + shift) + term(y1 + y2 - shift);
    }
    s / (4.0 * PI)
}

/// d/dκ of `image_green`, used for dξ/dz = −(1/2κ) dξ/dκ.
fn image_green_dkappa(rho: f64, y1: f64, y2: f64, kappa: f64, d: f64, regular: bool) -> f64 {
    let term = |t: f64| (-kappa * rho.hypot(t)).exp();
    let mut s = if regular { -1.0 } else { -term(y1 - y2) };
    s += term(y1 + y2);
    let cut = 42.0 / kappa;
    for k in 1.. {
        let shift = 2.0 * k as f64 * d;
        if shift - 2.0 * d > cut && shift - 2.0 * d > rho {
            break;
        }
        s -= term(y1 - y2 + shift) + term(y1 - y2 - shift);
        s += term(y1 + y2 + shift) + term(y1 + y2 - shift);
    }
    s / (4.0 * PI)
}

fn use_images(m: &ModeEnergy, cfg: &LayerConfig) -> Option<f64> {
    m.free_kappa().filter(|k| k * cfg.d >= IMAGE_REGIME_KD)
}

/// Regularized Green's function ξ(b; z).
pub fn xi(b: f64, z: &Energy, cfg: &LayerConfig) -> Result<Complex64> {
    cfg.check_b(b, "b")?;
    let m = ModeEnergy::new(z, cfg)?;
    Ok(xi_modes(b, &m, cfg))
}

pub(crate) fn xi_modes(b: f64, m: &ModeEnergy, cfg: &LayerConfig) -> Complex64 {
    let d = cfg.d;
    if let Some(kappa) = use_images(m, cfg) {
        return Complex64::new(image_green(0.0, b, b, kappa, d, true), 0.0);
    }
    let beta = PI * b / d;
    -log_series(m, beta, beta) / (PI * d) + xi2_unchecked(b, d)
}

/// dξ/dz for real z below the first threshold; positive.
pub fn dxi_dz(b: f64, z: &Energy, cfg: &LayerConfig) -> Result<f64> {
    cfg.check_b(b, "b")?;
    if !z.is_below_threshold(cfg) {
        return domain(format!("dxi_dz needs real z below E_1, got {}", z.z()));
    }
    let m = ModeEnergy::new(z, cfg)?;
    Ok(dxi_dz_modes(b, &m, cfg))
}

fn dxi_dz_modes(b: f64, m: &ModeEnergy, cfg: &LayerConfig) -> f64 {
    let d = cfg.d;
    if let Some(kappa) = use_images(m, cfg) {
        return -image_green_dkappa(0.0, b, b, kappa, d, true) / (2.0 * kappa);
    }
    let beta = PI * b / d;
    m.c * resolvent_series(m, beta, beta).re / (2.0 * PI * d)
}

/// dξ/d ln(E_1 − z) = −(E_1 − z) dξ/dz, finite even when E_1 − z underflows.
pub fn dxi_dlndepth(b: f64, z: &Energy, cfg: &LayerConfig) -> Result<f64> {
    cfg.check_b(b, "b")?;
    let t = match z.ln_depth() {
        Some(t) => t,
        None => {
            let gap = cfg.threshold(1) - z.re();
            if !z.is_real() || gap <= 0.0 {
                return domain("dxi_dlndepth needs a real energy below E_1");
            }
            gap.ln()
        }
    };
    let e = Energy::below_threshold(cfg, t);
    let m = ModeEnergy::new(&e, cfg)?;
    let d = cfg.d;
    let beta = PI * b / d;
    let s1 = beta.sin();
    let rest = resolvent_series_from2(&m, beta, beta);
    Ok(-(s1 * s1 + t.exp() * m.c * rest) / (2.0 * PI * d))
}

/// Free layer resolvent kernel G₀(x₁, x₂; z). Points are (x, x₂, y).
pub fn free_green(x1: [f64; 3], x2: [f64; 3], z: &Energy, cfg: &LayerConfig) -> Result<Complex64> {
    let d = cfg.d;
    for p in [x1, x2] {
        if !(p[2] >= 0.0 && p[2] <= d) {
            return domain(format!("point {p:?} lies outside the layer"));
        }
    }
    if x1 == x2 {
        return Err(Error::Singular("free_green at coinciding points; use xi".into()));
    }
    if x1[2] == 0.0 || x1[2] == d || x2[2] == 0.0 || x2[2] == d {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let m = ModeEnergy::new(z, cfg)?;
    let rho = (x1[0] - x2[0]).hypot(x1[1] - x2[1]);
    Ok(green_modes(rho, x1[2], x2[2], &m, cfg))
}

pub(crate) fn green_modes(rho: f64, y1: f64, y2: f64, m: &ModeEnergy, cfg: &LayerConfig) -> Complex64 {
    let d = cfg.d;
    if let Some(kappa) = use_images(m, cfg) {
        return Complex64::new(image_green(rho, y1, y2, kappa, d, false), 0.0);
    }
    if rho == 0.0 {
        return -vertical_offdiag(y1, y2, m, cfg);
    }
    let b1 = PI * y1 / d;
    let b2 = PI * y2 / d;
    let mut sum = Complex64::new(0.0, 0.0);
    let open = if m.is_real() { m.w.re.max(0.0).sqrt() as usize + 1 } else { 0 };
    for n in 1..2_000_000usize {
        let ss = (n as f64 * b1).sin() * (n as f64 * b2).sin();
        let k0 = match (n, m.ln_kappa1()) {
            (1, Some(lk)) => Complex64::new(specfun::k0_from_ln(lk + rho.ln()), 0.0),
            _ => {
                let kap = m.kappa(n as u32, cfg);
                if kap.im == 0.0 {
                    Complex64::new(specfun::k0(kap.re * rho), 0.0)
                } else {
                    specfun::k0_k1_complex(kap * rho).0
                }
            }
        };
        sum += ss * k0;
        if n > open && k0.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    sum / (PI * d)
}

/// Λ_jm for two perturbations on the same vertical line:
/// (1/πd) Σ ln√(1 − w/n²) s_n(b_j) s_n(b_m) − ξ₂((b_j+b_m)/2) + ξ₂(|b_j−b_m|/2).
pub(crate) fn vertical_offdiag(bj: f64, bm: f64, m: &ModeEnergy, cfg: &LayerConfig) -> Complex64 {
    let d = cfg.d;
    if let Some(kappa) = use_images(m, cfg) {
        return Complex64::new(-image_green(0.0, bj, bm, kappa, d, false), 0.0);
    }
    let s = log_series(m, PI * bj / d, PI * bm / d) / (PI * d);
    s - xi2_unchecked(0.5 * (bj + bm), d) + xi2_unchecked(0.5 * (bj - bm).abs(), d)
}

/// N × N Krein matrix Λ(z): Λ_jj = α_j − ξ(b_j; z), Λ_jm = −G₀(a_j, a_m; z).
#[derive(Debug, Clone)]
pub struct KreinMatrix {
    entries: DMatrix<Complex64>,
    z: Energy,
    perturbations: Vec<Perturbation>,
}

impl KreinMatrix {
    pub(crate) fn from_parts(entries: DMatrix<Complex64>, z: Energy, perturbations: Vec<Perturbation>) -> Self {
        Self { entries, z, perturbations }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn z(&self) -> Energy {
        self.z
    }

    pub fn perturbations(&self) -> &[Perturbation] {
        &self.perturbations
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_imag(&self) -> f64 {
        self.entries.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|v| v.re)
    }

    /// Eigen-decomposition of the real part (the whole matrix below E_1),
    /// eigenvalues ascending.
    pub fn real_eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        sorted_eigen(self.real_part())
    }
}

pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn krein_matrix(perts: &[Perturbation], z: &Energy, cfg: &LayerConfig) -> Result<KreinMatrix> {
    validate_all(perts, cfg)?;
    let m = ModeEnergy::new(z, cfg)?;
    Ok(KreinMatrix { entries: krein_entries(perts, &m, cfg), z: *z, perturbations: perts.to_vec() })
}

pub(crate) fn krein_entries(perts: &[Perturbation], m: &ModeEnergy, cfg: &LayerConfig) -> DMatrix<Complex64> {
    let n = perts.len();
    let mut lam = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        let pj = &perts[j];
        lam[(j, j)] = Complex64::new(pj.alpha, 0.0) - xi_modes(pj.b, m, cfg);
        for k in 0..j {
            let pk = &perts[k];
            let rho = (pj.a[0] - pk.a[0]).hypot(pj.a[1] - pk.a[1]);
            let v =
                if rho == 0.0 { vertical_offdiag(pj.b, pk.b, m, cfg) } else { -green_modes(rho, pj.b, pk.b, m, cfg) };
            lam[(j, k)] = v;
            lam[(k, j)] = v;
        }
    }
    lam
}

/// The scaling x → σx of the layer: d → σd, a → σa, α → α/σ, z → z/σ²,
/// B → B/σ². Under it ξ → ξ/σ and eigenvalues scale by σ⁻².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleMap {
    sigma: f64,
}

impl ScaleMap {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return domain(format!("scale factor must be positive, got {sigma}"));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn config(&self, cfg: &LayerConfig) -> LayerConfig {
        LayerConfig { d: cfg.d * self.sigma }
    }

    pub fn perturbation(&self, p: &Perturbation) -> Perturbation {
        Perturbation { a: [p.a[0] * self.sigma, p.a[1] * self.sigma], b: p.b * self.sigma, alpha: p.alpha / self.sigma }
    }

    pub fn energy(&self, z: f64) -> f64 {
        z / (self.sigma * self.sigma)
    }

    pub fn coupling(&self, alpha: f64) -> f64 {
        alpha / self.sigma
    }

    pub fn field(&self, b: f64) -> f64 {
        b / (self.sigma * self.sigma)
    }

    pub fn xi_value(&self, xi: Complex64) -> Complex64 {
        xi / self.sigma
    }
}

/// Maps (config, perturbations, energy) through the scaling.
pub fn scale_transform(
    cfg: &LayerConfig,
    perts: &[Perturbation],
    z: f64,
    sigma: f64,
) -> Result<(LayerConfig, Vec<Perturbation>, f64)> {
    let s = ScaleMap::new(sigma)?;
    Ok((s.config(cfg), perts.iter().map(|p| s.perturbation(p)).collect(), s.energy(z)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi_cfg() -> LayerConfig {
        LayerConfig::default()
    }

    #[test]
    fn k_n_branches() {
        let c = pi_cfg();
        let k = k_n(&Energy::real(0.0), 1, &c);
        assert!((k - I).norm() < 1e-15);
        assert!((k_n(&Energy::real(2.0), 1, &c) - 1.0).norm() < 1e-15);
        assert!((k_n(&Energy::real(2.0), 2, &c) - I * 2f64.sqrt()).norm() < 1e-15);
        // continuity from the upper half plane
        let kc = k_n(&Energy::complex(Complex64::new(2.0, 1e-10)), 1, &c);
        assert!((kc - 1.0).norm() < 1e-9);
        assert!(kc.im >= 0.0);
    }

    #[test]
    fn closed_form_cosine_sums() {
        for &t in &[0.0, 0.3, 1.0, PI, 5.5, 2.0 * PI] {
            let (mut s2, mut s4) = (0.0, 0.0);
            for n in (1..200_000).rev() {
                let nf = n as f64;
                s2 += (nf * t).cos() / (nf * nf);
                s4 += (nf * t).cos() / (nf * nf * nf * nf);
            }
            assert!((s2 - cos_sum2(t)).abs() < 1e-5, "t={t}");
            assert!((s4 - cos_sum4(t)).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn xi_anchor_at_zero_energy() {
        let c = pi_cfg();
        let v = xi(PI / 2.0, &Energy::real(0.0), &c).unwrap();
        let want = -std::f64::consts::LN_2 / (2.0 * PI * PI);
        assert!((v.re - want).abs() < 1e-13);
        assert_eq!(v.im, 0.0);
        for &b in &[0.2, 1.0, 2.9] {
            let v = xi(b, &Energy::real(0.0), &c).unwrap().re;
            let want = (EULER_GAMMA + psi(b / PI) + 0.5 * PI / b.tan()) / (4.0 * PI * PI);
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn xi_euler_product_oracle() {
        // b = π/2 keeps odd modes only; Π_odd (1 − z/n²) = cos(π√z/2)
        let c = pi_cfg();
        for &z in &[0.1f64, 0.5, 0.93, -3.0] {
            let lhs = xi(PI / 2.0, &Energy::real(z), &c).unwrap().re - xi(PI / 2.0, &Energy::real(0.0), &c).unwrap().re;
            let prod = if z >= 0.0 { (0.5 * PI * z.sqrt()).cos() } else { (0.5 * PI * (-z).sqrt()).cosh() };
            let rhs = -0.5 * prod.ln() / (PI * PI);
            assert!((lhs - rhs).abs() < 1e-13, "z={z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn xi_imaginary_part_above_threshold() {
        let c = pi_cfg();
        let v = xi(PI / 2.0, &Energy::real(2.0), &c).unwrap();
        assert!((v.im - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!(xi(1.0, &Energy::real(4.0), &c).is_err());
        assert!(xi(0.0, &Energy::real(0.5), &c).is_err());
    }

    #[test]
    fn image_and_mode_representations_agree() {
        // both evaluated at the same point where each is accurate
        for &d in &[PI, 2.0] {
            let cfg = LayerConfig::new(d).unwrap();
            // crossover band of κd where either representation may be chosen
            for &kd in &[4.0, 6.0, 9.0] {
                let z = -(kd / d) * (kd / d);
                let e = Energy::real(z);
                let m = ModeEnergy::new(&e, &cfg).unwrap();
                let kappa = (-z).sqrt();
                for &b in &[0.1 * d, 0.37 * d, 0.5 * d, 0.9 * d] {
                    let beta = PI * b / d;
                    let modes = -log_series(&m, beta, beta).re / (PI * d) + xi2_unchecked(b, d);
                    let imgs = image_green(0.0, b, b, kappa, d, true);
                    assert!((modes - imgs).abs() < 1e-12, "d={d} z={z} b={b}: {modes} vs {imgs}");
                    let dm = m.c * resolvent_series(&m, beta, beta).re / (2.0 * PI * d);
                    let di = -image_green_dkappa(0.0, b, b, kappa, d, true) / (2.0 * kappa);
                    assert!(
                        (dm - di).abs() < 1e-12 * dm,
                        "d={d} z={z} b={b}: {dm} vs {di} rel {}",
                        (dm - di).abs() / dm
                    );
                }
                let (b1, b2) = (0.3 * d, 0.75 * d);
                let vm = -(log_series(&m, PI * b1 / d, PI * b2 / d).re / (PI * d) - xi2_unchecked(0.5 * (b1 + b2), d)
                    + xi2_unchecked(0.5 * (b2 - b1), d));
                let vi = image_green(0.0, b1, b2, kappa, d, false);
                assert!((vm - vi).abs() < 1e-12, "vertical d={d} z={z}");
                for &rho in &[0.05, 0.8, 3.0] {
                    let mut sum = 0.0;
                    for n in 1..4000 {
                        let kap = m.kappa(n, &cfg).re;
                        sum += specfun::k0(kap * rho) * (n as f64 * PI * b1 / d).sin() * (n as f64 * PI * b2 / d).sin();
                    }
                    let gm = sum / (PI * d);
                    let gi = image_green(rho, b1, b2, kappa, d, false);
                    assert!((gm - gi).abs() < 1e-11, "rho={rho} d={d} z={z}: {gm} vs {gi}");
                }
            }
        }
    }

    #[test]
    fn vertical_limit_of_horizontal_green() {
        let c = pi_cfg();
        let e = Energy::real(0.4);
        let (b1, b2) = (0.9, 2.1);
        let g_at = |eps: f64| free_green([0.0, 0.0, b1], [eps, 0.0, b2], &e, &c).unwrap().re;
        let m = ModeEnergy::new(&e, &c).unwrap();
        let vert = -vertical_offdiag(b1, b2, &m, &c).re;
        // G₀ is smooth in ρ² at fixed distinct heights: Richardson on ε, ε/2
        let (e1, e2) = (0.02, 0.01);
        let extrap = (4.0 * g_at(e2) - g_at(e1)) / 3.0;
        assert!((extrap - vert).abs() < 1e-6, "{extrap} vs {vert}");
    }

    #[test]
    fn green_dirichlet_and_symmetry() {
        let c = pi_cfg();
        let e = Energy::real(0.3);
        assert_eq!(free_green([0.0, 0.0, 0.0], [1.0, 0.0, 1.0], &e, &c).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(free_green([0.0, 0.0, 1.0], [1.0, 0.0, PI], &e, &c).unwrap(), Complex64::new(0.0, 0.0));
        let p = [0.1, -0.4, 0.7];
        let q = [0.9, 0.3, 2.2];
        for z in [Energy::real(0.3), Energy::real(3.7), Energy::complex(Complex64::new(1.5, 0.2))] {
            let a = free_green(p, q, &z, &c).unwrap();
            let b = free_green(q, p, &z, &c).unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm());
        }
        let g = free_green(p, q, &Energy::real(0.3), &c).unwrap();
        assert_eq!(g.im, 0.0);
        assert!(free_green(p, p, &e, &c).is_err());
    }

    #[test]
    fn green_open_channel_uses_hankel() {
        // a single open channel: (i/2d) H0(kρ) s s + closed K0 modes
        let c = pi_cfg();
        let z = 2.5;
        let e = Energy::real(z);
        let (y1, y2, rho) = (0.8, 1.9, 1.3);
        let g = free_green([0.0, 0.0, y1], [rho, 0.0, y2], &e, &c).unwrap();
        let k1 = (z - 1.0f64).sqrt();
        let mut want = I / (2.0 * PI) * specfun::h1_0(Complex64::new(k1 * rho, 0.0)) * (y1.sin() * y2.sin());
        for n in 2..200 {
            let nf = n as f64;
            want += specfun::k0((nf * nf - z).sqrt() * rho) * (nf * y1).sin() * (nf * y2).sin() / (PI * PI);
        }
        assert!((g - want).norm() < 1e-12);
    }

    #[test]
    fn xi2_values() {
        let d = 2.5;
        let v = xi2(d / 2.0, d).unwrap();
        let want = -2.0 * std::f64::consts::LN_2 / (4.0 * PI * d);
        assert!((v - want).abs() < 1e-15);
        // reflection ψ(1−x) = ψ(x) + π cot πx makes ξ₂ symmetric about d/2
        for &b in &[0.1, 0.6, 1.1] {
            assert!((xi2(b, d).unwrap() - xi2(d - b, d).unwrap()).abs() < 1e-13);
        }
        // near the wall ξ₂ follows the mirror-image term −1/(8πb)
        let b = 1e-6;
        assert!((xi2(b, d).unwrap() * 8.0 * PI * b + 1.0).abs() < 1e-5);
        assert!(xi2(0.0, d).is_err());
    }

    #[test]
    fn dxi_dz_anchor_and_finite_difference() {
        let c = pi_cfg();
        let v = dxi_dz(PI / 2.0, &Energy::real(0.0), &c).unwrap();
        assert!((v - 1.0 / 16.0).abs() < 1e-14);
        let (b, z) = (1.0, -3.7);
        let h = 1e-5;
        let fd =
            (xi(b, &Energy::real(z + h), &c).unwrap().re - xi(b, &Energy::real(z - h), &c).unwrap().re) / (2.0 * h);
        let an = dxi_dz(b, &Energy::real(z), &c).unwrap();
        assert!((fd - an).abs() < 1e-6 * an);
        assert!(dxi_dz(b, &Energy::real(1.5), &c).is_err());
    }

    #[test]
    fn log_depth_energy_is_consistent() {
        let c = LayerConfig::new(2.0).unwrap();
        let t = -3.0f64;
        let e1 = Energy::below_threshold(&c, t);
        let e2 = Energy::real(c.threshold(1) - t.exp());
        for &b in &[0.3, 1.0] {
            let a = xi(b, &e1, &c).unwrap().re;
            let bb = xi(b, &e2, &c).unwrap().re;
            assert!((a - bb).abs() < 1e-12);
            let da = dxi_dlndepth(b, &e1, &c).unwrap();
            let db = -t.exp() * dxi_dz(b, &e2, &c).unwrap();
            assert!((da - db).abs() < 1e-12 * db.abs());
        }
        // far below rounding, ξ stays affine in ln depth with slope −sin²(πb/d)/(2πd)
        let b = 0.7;
        let s = (PI * b / 2.0).sin();
        let x1 = xi(b, &Energy::below_threshold(&c, -800.0), &c).unwrap().re;
        let x2 = xi(b, &Energy::below_threshold(&c, -900.0), &c).unwrap().re;
        assert!(((x2 - x1) / -100.0 + s * s / (2.0 * PI * 2.0)).abs() < 1e-13);
    }

    #[test]
    fn krein_matrix_structure() {
        let c = pi_cfg();
        let perts = [
            Perturbation::new([0.0, 0.0], 1.0, 0.3),
            Perturbation::new([1.2, 0.0], 1.0, 0.3),
            Perturbation::new([0.0, 0.0], 2.4, -0.2),
        ];
        let k = krein_matrix(&perts, &Energy::real(-0.5), &c).unwrap();
        let e = k.entries();
        for j in 0..3 {
            for m in 0..3 {
                assert_eq!(e[(j, m)], e[(m, j)]);
                assert_eq!(e[(j, m)].im, 0.0);
            }
        }
        assert!((e[(0, 0)] - e[(1, 1)]).norm() < 1e-15);
        let single = krein_matrix(&perts[..1], &Energy::real(-0.5), &c).unwrap();
        let want = 0.3 - xi(1.0, &Energy::real(-0.5), &c).unwrap();
        assert!((single.entries()[(0, 0)] - want).norm() < 1e-15);
        let dup = [perts[0], perts[0]];
        assert!(krein_matrix(&dup, &Energy::real(-0.5), &c).is_err());
    }

    #[test]
    fn scaling_of_xi() {
        let c = pi_cfg();
        let s = ScaleMap::new(2.0).unwrap();
        let big = s.config(&c);
        let lhs = xi(PI, &Energy::real(-0.25), &big).unwrap();
        let rhs = s.xi_value(xi(PI / 2.0, &Energy::real(-1.0), &c).unwrap());
        assert!((lhs - rhs).norm() < 1e-10);
        let id = ScaleMap::new(1.0).unwrap();
        assert_eq!(id.config(&c), c);
        assert!(ScaleMap::new(0.0).is_err());
    }
}
