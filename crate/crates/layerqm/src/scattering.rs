//! On-shell scattering above the first threshold: the single-center
//! S-matrix, its amplitude and the finite-rank N-center scattering operator.

use crate::error::{domain, Error, Result};
use crate::layer_green::{krein_matrix, xi, Energy, LayerConfig, Perturbation};
use crate::specfun;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const THRESHOLD_GUARD: f64 = 1e-9;

/// Open channels at a real energy above E_1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBasis {
    pub z: f64,
    pub open_count: usize,
    /// k_n = √(z − E_n) for n = 1..=open_count
    pub momenta: Vec<f64>,
}

impl ChannelBasis {
    pub fn new(z: f64, cfg: &LayerConfig) -> Result<Self> {
        if !(z > cfg.threshold(1)) {
            return domain(format!("scattering needs z above E_1 = {}, got {z}", cfg.threshold(1)));
        }
        let open = cfg.open_channels(z);
        for n in [open as u32, open as u32 + 1] {
            let e = cfg.threshold(n);
            if (z - e).abs() <= THRESHOLD_GUARD * (1.0 + e) {
                return Err(Error::Threshold(z));
            }
        }
        let momenta = (1..=open as u32).map(|n| (z - cfg.threshold(n)).sqrt()).collect();
        Ok(Self { z, open_count: open, momenta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix1 {
    pub matrix: DMatrix<Complex64>,
    pub alpha: f64,
    pub pert: Perturbation,
    pub basis: ChannelBasis,
}

impl SMatrix1 {
    /// δ_n = (1/2i) ln S_nn for each open channel.
    pub fn phase_shifts(&self) -> Vec<Complex64> {
        (0..self.basis.open_count).map(|n| self.matrix[(n, n)].ln() / (2.0 * I)).collect()
    }
}

/// S_nj = δ_nj + (i/d) s_n(b) s_j(b) / (α − ξ(b; z)), s_n(b) = sin(πnb/d).
pub fn smatrix_single(z: f64, pert: &Perturbation, cfg: &LayerConfig) -> Result<SMatrix1> {
    pert.validate(cfg)?;
    let basis = ChannelBasis::new(z, cfg)?;
    let n = basis.open_count;
    let mut m = DMatrix::identity(n, n);
    if pert.is_active() {
        let den = Complex64::new(pert.alpha, 0.0) - xi(pert.b, &Energy::real(z), cfg)?;
        let s = sines(pert.b, n, cfg);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] += I * s[r] * s[c] / (cfg.d() * den);
            }
        }
    }
    Ok(SMatrix1 { matrix: m, alpha: pert.alpha, pert: *pert, basis })
}

fn sines(b: f64, n: usize, cfg: &LayerConfig) -> Vec<f64> {
    (1..=n).map(|k| (PI * k as f64 * b / cfg.d()).sin()).collect()
}

/// max |(S S†)_ns − δ_ns|.
pub fn unitarity_defect(s: &DMatrix<Complex64>) -> f64 {
    let n = s.nrows();
    let p = s * s.adjoint() - DMatrix::<Complex64>::identity(n, n);
    p.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Scattering amplitude from incoming channel n, direction ω, into channel j
/// and direction ω_x:
/// f_jn = e^{iπ/4} / (d √(2πk_j)) · s_j s_n / (α − ξ) · e^{ik_n ω·a − ik_j ω_x·a}.
/// Rows are j, columns n.
pub fn amplitude_single(
    z: f64,
    omega: [f64; 2],
    omega_x: [f64; 2],
    pert: &Perturbation,
    cfg: &LayerConfig,
) -> Result<DMatrix<Complex64>> {
    for w in [omega, omega_x] {
        if ((w[0] * w[0] + w[1] * w[1]) - 1.0).abs() > 1e-12 {
            return domain(format!("direction {w:?} is not a unit vector"));
        }
    }
    pert.validate(cfg)?;
    let basis = ChannelBasis::new(z, cfg)?;
    let n = basis.open_count;
    let mut f = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    if !pert.is_active() {
        return Ok(f);
    }
    let den = Complex64::new(pert.alpha, 0.0) - xi(pert.b, &Energy::real(z), cfg)?;
    let s = sines(pert.b, n, cfg);
    let pre = Complex64::from_polar(1.0, PI / 4.0) / den;
    let wa = omega[0] * pert.a[0] + omega[1] * pert.a[1];
    let wxa = omega_x[0] * pert.a[0] + omega_x[1] * pert.a[1];
    for j in 0..n {
        let kj = basis.momenta[j];
        for c in 0..n {
            let kn = basis.momenta[c];
            let phase = Complex64::from_polar(1.0, kn * wa - kj * wxa);
            f[(j, c)] = pre * s[j] * s[c] / (cfg.d() * (2.0 * PI * kj).sqrt()) * phase;
        }
    }
    Ok(f)
}

/// One amplitude entry, 1-based channels; closed channels are a domain error.
pub fn amplitude_entry(
    z: f64,
    j: usize,
    n: usize,
    omega: [f64; 2],
    omega_x: [f64; 2],
    pert: &Perturbation,
    cfg: &LayerConfig,
) -> Result<Complex64> {
    let open = cfg.open_channels(z);
    if j == 0 || n == 0 || j > open || n > open {
        return domain(format!("channels ({j}, {n}) are not open at z = {z} ({open} open)"));
    }
    Ok(amplitude_single(z, omega, omega_x, pert, cfg)?[(j - 1, n - 1)])
}

/// S = I + V C V* on L²(S¹) ⊗ ℂ^open, where V maps the coefficient of
/// (channel n, center k) to the plane-wave profile e^{−ik_n ω·a_k} in channel
/// n, and C_{(m,j),(n,k)} = (i/2πd) s_m(b_j) s_n(b_k) λ_jk with λ = Λ⁻¹.
/// Index (n, k) is stored at n·N + k.
#[derive(Debug, Clone, PartialEq)]
pub struct SOperatorN {
    pub basis: ChannelBasis,
    pub centers: Vec<[f64; 2]>,
    pub coefficients: DMatrix<Complex64>,
}

impl SOperatorN {
    fn dim(&self) -> usize {
        self.coefficients.nrows()
    }

    fn index(&self, p: usize) -> (usize, usize) {
        (p / self.centers.len(), p % self.centers.len())
    }

    /// V*V: δ_nn′ 2π J₀(k_n |a_k − a_k′|).
    pub fn gram(&self) -> DMatrix<Complex64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |p, q| {
            let (n, k) = self.index(p);
            let (n2, k2) = self.index(q);
            if n != n2 {
                return Complex64::new(0.0, 0.0);
            }
            let r = (self.centers[k][0] - self.centers[k2][0]).hypot(self.centers[k][1] - self.centers[k2][1]);
            Complex64::new(2.0 * PI * specfun::bessel_j(0, self.basis.momenta[n] * r), 0.0)
        })
    }

    /// V*V from an M-point angular rule.
    pub fn gram_quadrature(&self, points: usize) -> DMatrix<Complex64> {
        let m = self.dim();
        let w = 2.0 * PI / points as f64;
        DMatrix::from_fn(m, m, |p, q| {
            let (n, k) = self.index(p);
            let (n2, k2) = self.index(q);
            if n != n2 {
                return Complex64::new(0.0, 0.0);
            }
            let dx = self.centers[k][0] - self.centers[k2][0];
            let dy = self.centers[k][1] - self.centers[k2][1];
            let kn = self.basis.momenta[n];
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..points {
                let th = w * i as f64;
                s += Complex64::from_polar(1.0, kn * (th.cos() * dx + th.sin() * dy));
            }
            s * w
        })
    }

    /// ‖S*S − I‖ and ‖SS* − I‖ computed on the range of V with the given
    /// Gram matrix; the larger of the two.
    pub fn unitarity_defect_with(&self, gram: &DMatrix<Complex64>) -> f64 {
        let c = &self.coefficients;
        let ca = c.adjoint();
        let x1 = c + &ca + &ca * gram * c;
        let x2 = c + &ca + c * gram * &ca;
        let root = hermitian_sqrt(gram);
        let n1 = (&root * x1 * &root).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let n2 = (&root * x2 * &root).iter().map(|v| v.norm()).fold(0.0, f64::max);
        n1.max(n2)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect_with(&self.gram())
    }

    pub fn quadrature_defect(&self, points: usize) -> f64 {
        self.unitarity_defect_with(&self.gram_quadrature(points))
    }

    /// Kernel of S − I between (channel m, direction ω′) and (channel n, direction ω).
    pub fn kernel(&self, m: usize, omega_out: f64, n: usize, omega_in: f64) -> Complex64 {
        let nc = self.centers.len();
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..nc {
            let a = self.centers[j];
            let out =
                Complex64::from_polar(1.0, -self.basis.momenta[m] * (omega_out.cos() * a[0] + omega_out.sin() * a[1]));
            for k in 0..nc {
                let b = self.centers[k];
                let inn =
                    Complex64::from_polar(1.0, self.basis.momenta[n] * (omega_in.cos() * b[0] + omega_in.sin() * b[1]));
                s += self.coefficients[(m * nc + j, n * nc + k)] * out * inn;
            }
        }
        s
    }

    /// Dense operator sampled on an M-point angular grid, scaled to be
    /// unitary in plain ℓ²: I + (2π/M) V C V*.
    pub fn dense_on_grid(&self, points: usize) -> DMatrix<Complex64> {
        let open = self.basis.open_count;
        let w = 2.0 * PI / points as f64;
        let dim = open * points;
        DMatrix::from_fn(dim, dim, |p, q| {
            let (m, i) = (p / points, p % points);
            let (n, l) = (q / points, q % points);
            let k = w * self.kernel(m, w * i as f64, n, w * l as f64);
            if p == q {
                k + 1.0
            } else {
                k
            }
        })
    }
}

fn hermitian_sqrt(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let d = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// Assembles the N-center scattering operator at energy z.
pub fn soperator_n(z: f64, perts: &[Perturbation], cfg: &LayerConfig) -> Result<SOperatorN> {
    let basis = ChannelBasis::new(z, cfg)?;
    let active: Vec<Perturbation> = perts.iter().copied().filter(|p| p.is_active()).collect();
    let nc = active.len();
    let open = basis.open_count;
    let centers: Vec<[f64; 2]> = active.iter().map(|p| p.a).collect();
    let mut coeff = DMatrix::from_element(open * nc, open * nc, Complex64::new(0.0, 0.0));
    if nc > 0 {
        let lam = krein_matrix(&active, &Energy::real(z), cfg)?;
        let svd = lam.entries().clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-13 * smax) {
            return Err(Error::EmbeddedEigenvalue(z));
        }
        let inv = lam.entries().clone().try_inverse().ok_or(Error::EmbeddedEigenvalue(z))?;
        let s: Vec<Vec<f64>> = active.iter().map(|p| sines(p.b, open, cfg)).collect();
        let pre = I / (2.0 * PI * cfg.d());
        for m in 0..open {
            for j in 0..nc {
                for n in 0..open {
                    for k in 0..nc {
                        coeff[(m * nc + j, n * nc + k)] = pre * s[j][m] * s[k][n] * inv[(j, k)];
                    }
                }
            }
        }
    }
    Ok(SOperatorN { basis, centers, coefficients: coeff })
}
