//! Bound state of a single point interaction: the root of ξ(b; z) = α
//! below the first threshold, its eigenfunction and the coupling asymptotics.

use crate::error::{domain, Error, Result};
use crate::layer_green::{dxi_dlndepth, free_green, xi, Energy, LayerConfig, Perturbation};
use crate::specfun;
use num_complex::Complex64;
use std::f64::consts::PI;

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundState1 {
    pub eps: f64,
    /// ln(E_1 − eps); stays accurate when E_1 − eps is below rounding.
    pub ln_gap: f64,
    pub alpha: f64,
    pub pert: Perturbation,
    pub normalized: bool,
    pub cfg: LayerConfig,
}

impl BoundState1 {
    pub fn energy(&self) -> Energy {
        energy_at_depth(&self.cfg, self.ln_gap)
    }

    /// ½ ln ‖G₀(·, a; eps)‖², using ‖G₀(·, a; z)‖² = dξ/dz.
    pub fn ln_norm(&self) -> Result<f64> {
        let slope = -dxi_dlndepth(self.pert.b, &self.energy(), &self.cfg)?;
        Ok(0.5 * (slope.ln() - self.ln_gap))
    }
}

/// Energy E_1 − e^t, kept in depth form while it lies in (0, E_1).
pub(crate) fn energy_at_depth(cfg: &LayerConfig, t: f64) -> Energy {
    if t < cfg.threshold(1).ln() {
        Energy::below_threshold(cfg, t)
    } else {
        Energy::real(cfg.threshold(1) - t.exp())
    }
}

fn xi_depth(b: f64, t: f64, cfg: &LayerConfig) -> Result<f64> {
    Ok(xi(b, &energy_at_depth(cfg, t), cfg)?.re)
}

/// Solves ξ(b; z) = α on (−∞, E_1). The unknown is t = ln(E_1 − z), in
/// which ξ is smooth, strictly decreasing and asymptotically affine as
/// t → −∞.
pub fn solve_bound_state(pert: &Perturbation, cfg: &LayerConfig) -> Result<BoundState1> {
    pert.validate(cfg)?;
    let alpha = pert.alpha;
    if !alpha.is_finite() {
        return domain("a switched-off perturbation has no bound state");
    }
    let b = pert.b;
    let e1 = cfg.threshold(1);
    let g = |t: f64| -> Result<f64> { Ok(xi_depth(b, t, cfg)? - alpha) };

    let z0 = (-32.0 * PI * PI * alpha * alpha - 1.0).min(0.0);
    let mut t_hi = (e1 - z0).ln();
    let mut g_hi = g(t_hi)?;
    while g_hi >= 0.0 {
        t_hi += 2.0;
        g_hi = g(t_hi)?;
    }
    let mut step = 1.0;
    let mut t_lo = t_hi - step;
    let mut g_lo = g(t_lo)?;
    while g_lo <= 0.0 {
        t_hi = t_lo;
        g_hi = g_lo;
        step *= 2.0;
        t_lo -= step;
        g_lo = g(t_lo)?;
    }

    let tol = 1e-13 * (1.0 + alpha.abs());
    let mut t = if g_lo.abs() < g_hi.abs() { t_lo } else { t_hi };
    let mut gt = if g_lo.abs() < g_hi.abs() { g_lo } else { g_hi };
    for _ in 0..MAX_ITER {
        if gt.abs() <= tol || (t_lo - t_hi).abs() <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            break;
        }
        let slope = dxi_dlndepth(b, &energy_at_depth(cfg, t), cfg)?;
        let mut next = t - gt / slope;
        let (lo, hi) = (t_lo.min(t_hi), t_lo.max(t_hi));
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (t_lo + t_hi);
        }
        let gn = g(next)?;
        if gn > 0.0 {
            t_lo = next;
        } else {
            t_hi = next;
        }
        // a Newton step that fails to halve the residual is followed by bisection
        if gn.abs() > 0.5 * gt.abs() {
            let mid = 0.5 * (t_lo + t_hi);
            let gm = g(mid)?;
            if gm > 0.0 {
                t_lo = mid;
            } else {
                t_hi = mid;
            }
            if gm.abs() < gn.abs() {
                t = mid;
                gt = gm;
                continue;
            }
        }
        t = next;
        gt = gn;
    }
    if gt.abs() > 1e-11 * (1.0 + alpha.abs()) {
        return Err(Error::Singular(format!("bound-state solver stalled at residual {gt:e} for alpha = {alpha}")));
    }
    Ok(BoundState1 { eps: e1 - t.exp(), ln_gap: t, alpha, pert: *pert, normalized: false, cfg: *cfg })
}

/// Unnormalized bound state ψ = G₀(x, a; eps).
pub fn eigenfunction_1(x: [f64; 3], bs: &BoundState1) -> Result<Complex64> {
    let v = free_green(x, bs.pert.point(), &bs.energy(), &bs.cfg)?;
    if bs.normalized {
        Ok(v * (-bs.ln_norm()?).exp())
    } else {
        Ok(v)
    }
}

pub fn normalize(bs: &BoundState1) -> BoundState1 {
    BoundState1 { normalized: true, ..*bs }
}

/// Weak-coupling eigenvalue: E_1 (1 − exp(−2πdα/sin²(πb/d))), which is
/// 1 − exp(−2π²α/sin²b) at d = π.
pub fn weak_coupling_estimate(alpha: f64, b: f64, cfg: &LayerConfig) -> Result<f64> {
    Ok(cfg.threshold(1) - weak_coupling_ln_gap(alpha, b, cfg)?.exp())
}

/// ln(E_1 − eps) of the weak-coupling law.
pub fn weak_coupling_ln_gap(alpha: f64, b: f64, cfg: &LayerConfig) -> Result<f64> {
    if !(alpha > 0.0) {
        return domain(format!("weak coupling needs alpha > 0, got {alpha}"));
    }
    cfg.check_b(b, "b")?;
    let s = (PI * b / cfg.d()).sin();
    Ok(cfg.threshold(1).ln() - 2.0 * PI * cfg.d() * alpha / (s * s))
}

/// −16π²α², independent of the layer.
pub fn strong_coupling_estimate(alpha: f64) -> Result<f64> {
    if !(alpha < 0.0) {
        return domain(format!("strong coupling needs alpha < 0, got {alpha}"));
    }
    Ok(-16.0 * PI * PI * alpha * alpha)
}

/// κ of a point interaction at the centre of a Dirichlet ball of radius c:
/// κ coth(κc) = −4πα. Then −16π²α² ≤ eps ≤ −κ².
pub fn ball_bracket_kappa(alpha: f64, c: f64) -> Result<f64> {
    let target = -4.0 * PI * alpha;
    if !(c > 0.0) || !(target > 1.0 / c) {
        return domain(format!("no ball bound state for alpha = {alpha}, radius {c}"));
    }
    let f = |k: f64| {
        if k * c < 1e-8 {
            1.0 / c - target
        } else {
            k / (k * c).tanh() - target
        }
    };
    let (mut lo, mut hi) = (0.0, target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Leading large-distance form of the strongly bound eigenfunction:
/// (1/πd) Σ_n √(π/(2κ_nρ)) e^{−κ_nρ} s_n(b) s_n(y), κ_n² = 16π²α² + E_n.
pub fn strong_coupling_eigenfunction(x: [f64; 3], pert: &Perturbation, cfg: &LayerConfig) -> Result<f64> {
    let alpha = pert.alpha;
    strong_coupling_estimate(alpha)?;
    let rho = (x[0] - pert.a[0]).hypot(x[1] - pert.a[1]);
    if !(rho > 0.0) {
        return domain("strong-coupling form needs x off the perturbation axis");
    }
    let d = cfg.d();
    let k2 = 16.0 * PI * PI * alpha * alpha;
    let mut sum = 0.0;
    for n in 1u32.. {
        let kappa = (k2 + cfg.threshold(n)).sqrt();
        let u = kappa * rho;
        let term = (0.5 * PI / u).sqrt() * (-u).exp();
        let nf = n as f64;
        sum += term * (PI * nf * pert.b / d).sin() * (PI * nf * x[2] / d).sin();
        if term < 1e-18 * sum.abs() || n > 100_000 {
            break;
        }
    }
    Ok(sum / (PI * d))
}

/// Weak-coupling shape near the perturbation, in the K₀ reading of the
/// closed modes: α s_1(y)/s_1(b) − (1/πd) ln ρ s_1(b) s_1(y)
/// + (1/πd) Σ_{n≥2} K₀(√(E_n − E_1) ρ) s_n(b) s_n(y).
pub fn weak_coupling_eigenfunction(x: [f64; 3], pert: &Perturbation, cfg: &LayerConfig) -> Result<f64> {
    let rho = (x[0] - pert.a[0]).hypot(x[1] - pert.a[1]);
    if !(rho > 0.0) {
        return domain("weak-coupling form needs x off the perturbation axis");
    }
    let d = cfg.d();
    let s = |n: u32, y: f64| (PI * n as f64 * y / d).sin();
    let (s1b, s1y) = (s(1, pert.b), s(1, x[2]));
    let mut v = pert.alpha * s1y / s1b - rho.ln() * s1b * s1y / (PI * d);
    let e1 = cfg.threshold(1);
    let mut tail = 0.0;
    for n in 2u32.. {
        let k = specfun::k0((cfg.threshold(n) - e1).sqrt() * rho);
        tail += k * s(n, pert.b) * s(n, x[2]);
        if k < 1e-18 * tail.abs().max(1e-300) || n > 1_000_000 {
            break;
        }
    }
    v += tail / (PI * d);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer_green::{dxi_dz, ModeEnergy};

    fn cfg() -> LayerConfig {
        LayerConfig::default()
    }

    fn solve(alpha: f64, b: f64) -> BoundState1 {
        solve_bound_state(&Perturbation::new([0.0, 0.0], b, alpha), &cfg()).unwrap()
    }

    #[test]
    fn round_trip_by_construction() {
        let c = cfg();
        let alpha = xi(PI / 2.0, &Energy::real(-1.0), &c).unwrap().re;
        let bs = solve(alpha, PI / 2.0);
        assert!((bs.eps + 1.0).abs() < 1e-10, "{}", bs.eps);
    }

    #[test]
    fn monotone_in_alpha_and_across_halflayer() {
        // E_1 − eps decreases; for α = 2 it is far below rounding of eps
        let mut prev = f64::INFINITY;
        for &a in &[-3.0, -1.0, -0.2, 0.0, 0.1, 0.5, 2.0] {
            let bs = solve(a, 1.0);
            assert!(bs.ln_gap < prev);
            assert!(bs.eps <= 1.0);
            prev = bs.ln_gap;
        }
        for &a in &[-1.0, 0.0, 0.3] {
            let centre = solve(a, PI / 2.0).eps;
            let off = solve(a, 1.0).eps;
            let edge = solve(a, 0.3).eps;
            assert!(centre < off && off < edge);
        }
    }

    #[test]
    fn derivative_in_alpha() {
        let (a, b, h) = (0.05, 1.2, 1e-6);
        let fd = (solve(a + h, b).eps - solve(a - h, b).eps) / (2.0 * h);
        let bs = solve(a, b);
        let an = 1.0 / dxi_dz(b, &bs.energy(), &cfg()).unwrap();
        assert!((fd - an).abs() < 1e-5 * an.abs(), "{fd} vs {an}");
    }

    #[test]
    fn deep_weak_coupling_keeps_depth() {
        let bs = solve(40.0, PI / 2.0);
        assert_eq!(bs.eps, 1.0);
        assert!((bs.ln_gap + 2.0 * PI * PI * 40.0).abs() < 2.0);
        let back = xi(PI / 2.0, &bs.energy(), &cfg()).unwrap().re;
        assert!((back - 40.0).abs() < 1e-10);
    }

    #[test]
    fn strong_coupling_and_ball_bracket() {
        assert!((strong_coupling_estimate(-1.0).unwrap() + 16.0 * PI * PI).abs() < 1e-12);
        assert!(strong_coupling_estimate(0.0).is_err());
        let bs = solve(-3.0, PI / 2.0);
        let kb = ball_bracket_kappa(-3.0, PI / 2.0).unwrap();
        assert!(kb * kb <= -bs.eps && -bs.eps <= 144.0 * PI * PI);
        let bs = solve(-10.0, PI / 2.0);
        assert!((bs.eps / strong_coupling_estimate(-10.0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eigenfunction_properties() {
        let c = cfg();
        let p = Perturbation::new([0.3, -0.2], PI / 6.0, -0.1);
        let bs = solve_bound_state(&p, &c).unwrap();
        assert_eq!(eigenfunction_1([1.0, 0.0, 0.0], &bs).unwrap().norm(), 0.0);
        assert_eq!(eigenfunction_1([1.0, 0.0, PI], &bs).unwrap().norm(), 0.0);
        let r = 0.8;
        let v0 = eigenfunction_1([0.3 + r, -0.2, 1.0], &bs).unwrap();
        assert_eq!(v0.im, 0.0);
        for &phi in &[0.7f64, 2.0, 4.4] {
            let v = eigenfunction_1([0.3 + r * phi.cos(), -0.2 + r * phi.sin(), 1.0], &bs).unwrap();
            assert!((v - v0).norm() < 1e-12 * v0.norm());
        }
        let far = eigenfunction_1([0.3 + 6.0, -0.2, 1.0], &bs).unwrap().re;
        assert!(far.abs() < 1e-3 * v0.re.abs());
        assert!(eigenfunction_1(p.point(), &bs).is_err());
    }

    #[test]
    fn strong_eigenfunction_matches_large_distance_form() {
        let c = cfg();
        let p = Perturbation::new([0.0, 0.0], PI / 2.0, -5.0);
        let bs = solve_bound_state(&p, &c).unwrap();
        for &(rho, y) in &[(1.0, PI / 2.0), (1.5, 1.2)] {
            let exact = eigenfunction_1([rho, 0.0, y], &bs).unwrap().re;
            let approx = strong_coupling_eigenfunction([rho, 0.0, y], &p, &c).unwrap();
            assert!((approx / exact - 1.0).abs() < 1e-2, "{approx} vs {exact}");
        }
    }

    #[test]
    fn weak_eigenfunction_differs_by_first_mode_only() {
        // G₀ minus the weak form is a multiple of sin(y) up to O(κ₁²)
        let c = cfg();
        let p = Perturbation::new([0.0, 0.0], 1.1, 8.0);
        let bs = solve_bound_state(&p, &c).unwrap();
        let pts = [[0.2, 0.0, 0.5], [0.5, 0.3, 1.7], [1.5, -1.0, 2.6], [0.05, 0.0, 1.0]];
        let ratios: Vec<f64> = pts
            .iter()
            .map(|x| {
                let g = eigenfunction_1(*x, &bs).unwrap().re;
                (g - weak_coupling_eigenfunction(*x, &p, &c).unwrap()) / x[2].sin()
            })
            .collect();
        for r in &ratios[1..] {
            assert!((r - ratios[0]).abs() < 1e-6, "{ratios:?}");
        }
    }

    #[test]
    fn weak_estimates() {
        let c = cfg();
        let want = 1.0 - (-6.0 * PI * PI).exp();
        assert!((weak_coupling_estimate(3.0, PI / 2.0, &c).unwrap() - want).abs() < 1e-15);
        assert!(weak_coupling_estimate(-1.0, 1.0, &c).is_err());
        // squeezing: the exact depth agrees with the law up to e^{O(1)}
        for &a in &[5.0, 10.0, 20.0] {
            let bs = solve(a, 1.0);
            let law = weak_coupling_ln_gap(a, 1.0, &c).unwrap();
            assert!((bs.ln_gap - law).abs() < 3.0, "alpha={a}");
        }
    }

    #[test]
    fn norm_from_radial_quadrature() {
        // ‖G₀‖² = Σ_n s_n(b)² (2/d)/(2π) ∫ K₀(κ_nρ)² ρ dρ, integrated numerically
        let c = LayerConfig::new(2.0).unwrap();
        let p = Perturbation::new([0.0, 0.0], 0.7, 0.2);
        let bs = solve_bound_state(&p, &c).unwrap();
        let m = ModeEnergy::new(&bs.energy(), &c).unwrap();
        let mut total = 0.0;
        for n in 1..400u32 {
            let kappa = m.kappa(n, &c).re;
            // ρ = e^u / κ
            let (a, b, steps) = (-40.0, 4.0, 4000);
            let h = (b - a) / steps as f64;
            let mut s = 0.0;
            for i in 0..=steps {
                let u = a + h * i as f64;
                let r = u.exp();
                let k = specfun::k0(r);
                let wgt = if i == 0 || i == steps { 0.5 } else { 1.0 };
                s += wgt * k * k * r * r;
            }
            let radial = s * h / (kappa * kappa);
            let sb = (PI * n as f64 * 0.7 / 2.0).sin();
            total += (2.0 / 2.0) * sb * sb * radial / (2.0 * PI);
        }
        let want = (2.0 * bs.ln_norm().unwrap()).exp();
        assert!((total / want - 1.0).abs() < 1e-3, "{total} vs {want}");
        let nb = normalize(&bs);
        let x = [0.4, 0.1, 1.0];
        let ratio = eigenfunction_1(x, &nb).unwrap().re / eigenfunction_1(x, &bs).unwrap().re;
        assert!((ratio - (-bs.ln_norm().unwrap()).exp()).abs() < 1e-12 * ratio);
    }
}
