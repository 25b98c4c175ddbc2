use crate::config::{JobConfig, Mode};
use crate::table::ResultTable;
use crate::CliError;
use layerqm::layer_green::{xi, Energy, LayerConfig, Perturbation};
use layerqm::magnetic::{self, MagneticConfig};
use layerqm::scattering::{smatrix_single, soperator_n, unitarity_defect};
use layerqm::spectrum_multi::{eigen_energy, eigenfunction_n, find_eigenvalues, spectral_lower_bound};
use layerqm::spectrum_single::{eigenfunction_1, normalize, solve_bound_state};
use layerqm::Error;
use rayon::prelude::*;

fn ctx(what: String) -> impl Fn(Error) -> CliError {
    move |e| CliError::Domain(format!("{what}: {e}"))
}

/// Runs a validated job. Scan points are evaluated in parallel and
/// assembled in grid order, so the table depends on the config alone.
pub fn run_job(job: &JobConfig) -> Result<ResultTable, CliError> {
    let mut table = match job.mode {
        Mode::XiScan => xi_scan(job)?,
        Mode::BoundStates => bound_states(job)?,
        Mode::Smatrix => smatrix(job)?,
        Mode::MagneticGaps => magnetic_gaps(job)?,
        Mode::EigenfunctionGrid => eigenfunction_grid(job)?,
    };
    table.meta("library", concat!("layerqm ", env!("CARGO_PKG_VERSION")));
    table.meta("mode", job.mode);
    table.meta("units", "hbar = 2m = 1");
    table.meta("config", serde_json::to_string(job).map_err(|e| CliError::Io(e.to_string()))?);
    Ok(table)
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |j| format!("{prefix}_{j}"))
}

fn collect_rows(table: &mut ResultTable, rows: Vec<Vec<f64>>) -> Result<(), CliError> {
    for r in rows {
        table.push(r)?;
    }
    Ok(())
}

fn xi_scan(job: &JobConfig) -> Result<ResultTable, CliError> {
    let cfg = job.layer_config()?;
    let mag = job.magnetic_config()?;
    let perts = job.perturbations();
    let mut cols = vec!["z".to_string()];
    for j in 1..=perts.len() {
        cols.push(format!("xi_re_{j}"));
        cols.push(format!("xi_im_{j}"));
    }
    let mut table = ResultTable::new(cols);
    let rows = job
        .scan()?
        .points()
        .into_par_iter()
        .map(|z| {
            let mut row = vec![z];
            for p in &perts {
                let v = match &mag {
                    Some(m) => magnetic::xi_b(p.b, z, m).map(|v| (v, 0.0)),
                    None => xi(p.b, &Energy::real(z), &cfg).map(|v| (v.re, v.im)),
                }
                .map_err(ctx(format!("xi at z = {z}, b = {}", p.b)))?;
                row.extend([v.0, v.1]);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    collect_rows(&mut table, rows)?;
    table.meta("field", mag.map_or("none".to_string(), |m| m.b().to_string()));
    Ok(table)
}

fn bound_states(job: &JobConfig) -> Result<ResultTable, CliError> {
    let cfg = job.layer_config()?;
    let perts = job.perturbations();
    let n = perts.len();
    let alphas = job.scan()?.points();
    let mut table = if job.coupled {
        let mut cols = vec!["alpha".to_string(), "count".to_string()];
        cols.extend(numbered("eps", n));
        ResultTable::new(cols)
    } else {
        ResultTable::new(std::iter::once("alpha".to_string()).chain(numbered("eps", n)).collect())
    };
    let rows = alphas
        .into_par_iter()
        .map(|alpha| {
            let set: Vec<Perturbation> = perts.iter().map(|p| Perturbation { alpha, ..*p }).collect();
            let mut row = vec![alpha];
            if job.coupled {
                let lo = spectral_lower_bound(&set, &cfg).map_err(ctx(format!("lower bound at alpha = {alpha}")))?;
                let res = find_eigenvalues(&set, &cfg, (lo, cfg.threshold(1)))
                    .map_err(ctx(format!("eigenvalues at alpha = {alpha}")))?;
                let mut eps: Vec<f64> =
                    res.eigenvalues.iter().flat_map(|e| std::iter::repeat_n(e.z, e.multiplicity)).collect();
                row.push(eps.len() as f64);
                eps.resize(n, f64::NAN);
                row.extend(eps);
            } else {
                for p in &set {
                    let bs = solve_bound_state(p, &cfg).map_err(ctx(format!("bound state at alpha = {alpha}")))?;
                    row.push(bs.eps);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    collect_rows(&mut table, rows)?;
    table.meta("threshold", cfg.threshold(1));
    Ok(table)
}

fn smatrix(job: &JobConfig) -> Result<ResultTable, CliError> {
    let cfg = job.layer_config()?;
    let perts = job.perturbations();
    let zs = job.scan()?.points();
    let single = perts.len() == 1;
    let max_open = zs.iter().map(|&z| cfg.open_channels(z)).max().unwrap_or(0);
    let mut cols = vec!["z".to_string(), "open_channels".to_string(), "unitarity_defect".to_string()];
    if single {
        for n in 1..=max_open {
            for m in 1..=max_open {
                cols.push(format!("s_re_{n}_{m}"));
                cols.push(format!("s_im_{n}_{m}"));
            }
        }
    }
    let mut table = ResultTable::new(cols);
    let rows = zs
        .into_par_iter()
        .map(|z| {
            let err = ctx(format!("scattering at z = {z}"));
            if single {
                let s = smatrix_single(z, &perts[0], &cfg).map_err(err)?;
                let open = s.basis.open_count;
                let mut row = vec![z, open as f64, unitarity_defect(&s.matrix)];
                for n in 0..max_open {
                    for m in 0..max_open {
                        let v = if n < open && m < open {
                            (s.matrix[(n, m)].re, s.matrix[(n, m)].im)
                        } else {
                            (f64::NAN, f64::NAN)
                        };
                        row.extend([v.0, v.1]);
                    }
                }
                Ok(row)
            } else {
                let s = soperator_n(z, &perts, &cfg).map_err(err)?;
                Ok(vec![z, s.basis.open_count as f64, s.unitarity_defect()])
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    collect_rows(&mut table, rows)?;
    Ok(table)
}

fn magnetic_cfg(job: &JobConfig) -> Result<MagneticConfig, CliError> {
    job.magnetic_config()?.ok_or_else(|| CliError::Config("layer.field is required".into()))
}

fn magnetic_gaps(job: &JobConfig) -> Result<ResultTable, CliError> {
    let cfg = magnetic_cfg(job)?;
    let perts = job.perturbations();
    if let Some(r) = job.magnetic.trace_gap {
        let gap = magnetic::gaps(&cfg, r + 1).pop().expect("r + 1 gaps");
        let amin = perts.iter().map(|p| p.alpha).fold(0.0, f64::min);
        let lo0 = (gap.hi() - 10.0).min(-(4.0 * std::f64::consts::PI * amin).powi(2) - 10.0);
        let trace = magnetic::lambda_branches_b(&perts, &gap, job.magnetic.points, lo0, &cfg)
            .map_err(ctx(format!("trace over gap {r}")))?;
        let mut table =
            ResultTable::new(std::iter::once("z".to_string()).chain(numbered("lambda", perts.len())).collect());
        collect_rows(&mut table, trace.into_iter().map(|(z, v)| std::iter::once(z).chain(v).collect()).collect())?;
        table.meta("gap", format!("{r} ({}, {})", gap.lo(), gap.hi()));
        if gap.left.is_some() {
            let holes = magnetic::empty_gap_intervals(&perts, &gap, &cfg).map_err(ctx("empty-gap search".into()))?;
            let text: Vec<String> = holes.iter().map(|(a, b)| format!("({a}, {b})")).collect();
            table.meta("alpha_shift_without_eigenvalue", if text.is_empty() { "none".into() } else { text.join(" ") });
        }
        return Ok(table);
    }
    let gaps = magnetic::gaps(&cfg, job.magnetic.gaps);
    let solved = gaps
        .par_iter()
        .map(|g| magnetic::gap_eigenvalues_multi(&perts, g, &cfg).map_err(ctx(format!("gap {}", g.index))))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table =
        ResultTable::new(["gap", "lo", "hi", "eigenvalue", "multiplicity"].iter().map(|s| s.to_string()).collect());
    for s in solved {
        let g = &s.gap;
        if s.eigenvalues.is_empty() {
            table.push(vec![g.index as f64, g.lo(), g.hi(), f64::NAN, 0.0])?;
        }
        for e in &s.eigenvalues {
            table.push(vec![g.index as f64, g.lo(), g.hi(), e.z, e.multiplicity as f64])?;
        }
    }
    Ok(table)
}

enum State {
    Single(layerqm::spectrum_single::BoundState1),
    Multi(Energy, Vec<f64>, LayerConfig),
    Magnetic(magnetic::MagneticEigenvalue, MagneticConfig),
}

fn eigenfunction_grid(job: &JobConfig) -> Result<ResultTable, CliError> {
    let grid = job.grid.expect("validated");
    let perts = job.perturbations();
    let cfg = job.layer_config()?;
    let state = if let Some(m) = job.magnetic_config()? {
        let gap = magnetic::gaps(&m, 1).pop().expect("one gap");
        let res = magnetic::gap_eigenvalues_multi(&perts, &gap, &m).map_err(ctx("lowest magnetic gap".into()))?;
        let e = res.eigenvalues.get(grid.state).ok_or_else(|| {
            CliError::Domain(format!("state {} requested, {} eigenvalues found", grid.state, res.eigenvalues.len()))
        })?;
        State::Magnetic(e.clone(), m)
    } else if perts.len() == 1 {
        if grid.state != 0 {
            return Err(CliError::Domain("a single centre has one bound state; use state = 0".into()));
        }
        State::Single(normalize(&solve_bound_state(&perts[0], &cfg).map_err(ctx("bound state".into()))?))
    } else {
        let lo = spectral_lower_bound(&perts, &cfg).map_err(ctx("lower bound".into()))?;
        let res = find_eigenvalues(&perts, &cfg, (lo, cfg.threshold(1))).map_err(ctx("eigenvalues".into()))?;
        let e = res.eigenvalues.get(grid.state).ok_or_else(|| {
            CliError::Domain(format!("state {} requested, {} eigenvalues found", grid.state, res.eigenvalues.len()))
        })?;
        State::Multi(eigen_energy(e, &cfg), e.vectors[0].iter().copied().collect(), cfg)
    };
    let xs = grid.x.points();
    let ys = grid.y.points();
    let pts: Vec<[f64; 3]> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, grid.plane, y])).collect();
    let rows = pts
        .par_iter()
        .map(|&p| {
            let v = match &state {
                State::Single(bs) => eigenfunction_1(p, bs),
                State::Multi(z, c, cfg) => eigenfunction_n(p, z, c, &perts, cfg),
                State::Magnetic(e, m) => magnetic::eigenfunction_b_n(p, e.z, &e.vectors[0], &perts, m),
            };
            match v {
                Ok(v) => Ok(vec![p[0], p[2], v.re, v.im]),
                // on a perturbation point the eigenfunction is singular
                Err(Error::Singular(_)) => Ok(vec![p[0], p[2], f64::NAN, f64::NAN]),
                Err(e) => Err(ctx(format!("eigenfunction at {p:?}"))(e)),
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = ResultTable::new(["x", "y", "psi_re", "psi_im"].iter().map(|s| s.to_string()).collect());
    collect_rows(&mut table, rows)?;
    let eps = match &state {
        State::Single(bs) => bs.eps,
        State::Multi(z, ..) => z.re(),
        State::Magnetic(e, _) => e.z,
    };
    table.meta("eigenvalue", eps);
    table.meta("normalized", matches!(state, State::Single(_)));
    table.meta("plane", grid.plane);
    Ok(table)
}
