//! Cross-fitted nuisance estimation and the derived per-point quantities.
//!
//! Raw nuisances are the regression/propensity functions
//!
//! ```text
//! e_z(x)  = E[Y | Z=z, X=x]        p_z(x)  = Pr(A=1 | Z=z, X=x)
//! e_1z(x) = E[Y | A=1, Z=z, X=x]   pi_1(x) = Pr(Z=1 | X=x)
//! m_z(x)  = E[Y (1-A) | Z=z, X=x]  (single-arm comparator only)
//! ```
//!
//! each fitted on the complement of a point's fold and evaluated in-fold.
//! Derived quantities follow by plug-in:
//!
//! ```text
//! phi = e11 - e10            delta_A = p1 - p0 (floored)
//! delta* = (e1 - e0 - phi) / delta_A
//! rho = p1 pi1 + p0 pi0      w = e1 pi1 + e0 pi0 - rho delta* - pi1 phi
//! ```
//!
//! `w` equals `e0 - p0 delta*` algebraically whenever `delta*` comes from
//! the same raw values without denominator flooring;
//! [`w_consistency_check`] verifies that identity.

use crate::data::{Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::learners::{self, FitTask, LearnerSpec, CLIP_HI, CLIP_LO};
use crate::simulation::oracle;

/// Sign-preserving floor applied to the Wald denominator `p1 - p0`.
pub const DENOM_FLOOR: f64 = 0.01;

/// Raw nuisance values at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPoint {
    pub e0: f64,
    pub e1: f64,
    pub e10: f64,
    pub e11: f64,
    pub p0: f64,
    pub p1: f64,
    pub pi1: f64,
    pub m0: Option<f64>,
    pub m1: Option<f64>,
}

/// Out-of-fold raw nuisance predictions for every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNuisances {
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub e10: Vec<f64>,
    pub e11: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub pi1: Vec<f64>,
    pub m0: Option<Vec<f64>>,
    pub m1: Option<Vec<f64>>,
    /// Learner diagnostics (ridge fallbacks, IRLS non-convergence, dropped
    /// ensemble candidates), labeled with fold and nuisance.
    pub flags: Vec<String>,
}

impl RawNuisances {
    pub fn n(&self) -> usize {
        self.e0.len()
    }

    pub fn point(&self, i: usize) -> RawPoint {
        RawPoint {
            e0: self.e0[i],
            e1: self.e1[i],
            e10: self.e10[i],
            e11: self.e11[i],
            p0: self.p0[i],
            p1: self.p1[i],
            pi1: self.pi1[i],
            m0: self.m0.as_ref().map(|v| v[i]),
            m1: self.m1.as_ref().map(|v| v[i]),
        }
    }

    pub fn has_single_arm(&self) -> bool {
        self.m0.is_some() && self.m1.is_some()
    }

    /// Number of probability predictions sitting at a clip bound.
    pub fn clip_count(&self) -> usize {
        [&self.p0, &self.p1, &self.pi1]
            .iter()
            .flat_map(|v| v.iter())
            .filter(|p| **p == CLIP_LO || **p == CLIP_HI)
            .count()
    }
}

/// Derived nuisance values at a single point (`delta_a` already floored).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedPoint {
    pub phi: f64,
    pub delta_a: f64,
    pub delta_star: f64,
    pub rho: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedNuisances {
    pub phi: Vec<f64>,
    pub delta_a: Vec<f64>,
    pub delta_star: Vec<f64>,
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
    /// Indices whose denominator was floored.
    pub floored: Vec<usize>,
}

impl DerivedNuisances {
    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn point(&self, i: usize) -> DerivedPoint {
        DerivedPoint {
            phi: self.phi[i],
            delta_a: self.delta_a[i],
            delta_star: self.delta_star[i],
            rho: self.rho[i],
            w: self.w[i],
        }
    }
}

/// Sign-preserving floor on the instrument-propensity contrast; the flag
/// reports whether flooring fired. An exact zero floors positive.
pub(crate) fn floor_denominator(raw_delta_a: f64) -> (f64, bool) {
    let floored = raw_delta_a.abs() < DENOM_FLOOR;
    let value = if floored {
        if raw_delta_a < 0.0 {
            -DENOM_FLOOR
        } else {
            DENOM_FLOOR
        }
    } else {
        raw_delta_a
    };
    (value, floored)
}

/// Derive the plug-in quantities from raw values at one point; the flag
/// reports whether the denominator was floored.
pub fn derive_point(raw: &RawPoint) -> (DerivedPoint, bool) {
    let phi = raw.e11 - raw.e10;
    let (delta_a, floored) = floor_denominator(raw.p1 - raw.p0);
    let delta_star = (raw.e1 - raw.e0 - phi) / delta_a;
    let pi0 = 1.0 - raw.pi1;
    let rho = raw.p1 * raw.pi1 + raw.p0 * pi0;
    let w = raw.e1 * raw.pi1 + raw.e0 * pi0 - rho * delta_star - raw.pi1 * phi;
    (
        DerivedPoint {
            phi,
            delta_a,
            delta_star,
            rho,
            w,
        },
        floored,
    )
}

/// Apply [`derive_point`] to every observation.
pub fn derive(raw: &RawNuisances) -> DerivedNuisances {
    let n = raw.n();
    let mut out = DerivedNuisances {
        phi: Vec::with_capacity(n),
        delta_a: Vec::with_capacity(n),
        delta_star: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        floored: Vec::new(),
    };
    for i in 0..n {
        let (p, floored) = derive_point(&raw.point(i));
        out.phi.push(p.phi);
        out.delta_a.push(p.delta_a);
        out.delta_star.push(p.delta_star);
        out.rho.push(p.rho);
        out.w.push(p.w);
        if floored {
            out.floored.push(i);
        }
    }
    out
}

/// Max over points of `|w - (e0 - p0 delta*)|`. An algebraic identity
/// bounds this by ~1e-10 whenever no denominator was floored; floored
/// points can break it (they are listed in `derived.floored`).
pub fn w_consistency_check(raw: &RawNuisances, derived: &DerivedNuisances) -> f64 {
    let mut max_abs: f64 = 0.0;
    for i in 0..raw.n() {
        let direct = raw.e0[i] - raw.p0[i] * derived.delta_star[i];
        max_abs = max_abs.max((derived.w[i] - direct).abs());
    }
    max_abs
}

/// Fit all raw nuisances by K-fold cross-fitting.
///
/// For each fold, models are trained on the complement and evaluated on
/// the fold's own points: `e_z` regresses `Y` on `X` within `{Z=z}`,
/// `e_1z` within `{A=1, Z=z}`, `p_z` is a probability fit of `A` within
/// `{Z=z}`, `pi_1` a probability fit of `Z` on everything, and (when the
/// single-arm comparator is requested) `m_z` regresses `Y(1-A)` within
/// `{Z=z}`. An `Oracle` spec skips fitting and evaluates the simulation
/// oracle at each covariate row.
pub fn fit_raw_nuisances(
    ds: &Dataset,
    folds: &FoldAssignment,
    spec: &LearnerSpec,
    need_single_arm: bool,
) -> Result<RawNuisances> {
    spec.validate()?;
    if folds.fold_of().len() != ds.n() {
        return Err(Error::invalid("fold assignment length does not match dataset"));
    }

    if let LearnerSpec::Oracle { er } = spec {
        return oracle_passthrough(ds, *er, need_single_arm);
    }

    let n = ds.n();
    let d = ds.d();
    let mut out = RawNuisances {
        e0: vec![0.0; n],
        e1: vec![0.0; n],
        e10: vec![0.0; n],
        e11: vec![0.0; n],
        p0: vec![0.0; n],
        p1: vec![0.0; n],
        pi1: vec![0.0; n],
        m0: need_single_arm.then(|| vec![0.0; n]),
        m1: need_single_arm.then(|| vec![0.0; n]),
        flags: Vec::new(),
    };

    for fold in 0..folds.k() {
        let train = folds.out_of_fold(fold);
        let eval = folds.in_fold(fold);
        if eval.is_empty() {
            return Err(Error::estimation(format!("fold {fold} has no evaluation points")));
        }

        let z_cell: Vec<Vec<usize>> = (0..2u8)
            .map(|z| train.iter().copied().filter(|&i| ds.z()[i] == z).collect())
            .collect();
        let a1z_cell: Vec<Vec<usize>> = (0..2u8)
            .map(|z| {
                train
                    .iter()
                    .copied()
                    .filter(|&i| ds.z()[i] == z && ds.a()[i] == 1)
                    .collect()
            })
            .collect();
        for z in 0..2 {
            if z_cell[z].is_empty() {
                return Err(Error::EmptyTrainingCell {
                    cell: format!("(Z={z})"),
                    fold,
                });
            }
            if a1z_cell[z].is_empty() {
                return Err(Error::EmptyTrainingCell {
                    cell: format!("(A=1, Z={z})"),
                    fold,
                });
            }
        }
        if train.iter().all(|&i| ds.a()[i] == 1) {
            return Err(Error::EmptyTrainingCell {
                cell: "(A=0)".into(),
                fold,
            });
        }

        let fit_into = |idx: &[usize],
                            target: &dyn Fn(usize) -> f64,
                            task: FitTask,
                            dest: &mut [f64],
                            label: &str,
                            flags: &mut Vec<String>|
         -> Result<()> {
            let mut features = Vec::with_capacity(idx.len() * d);
            let mut targets = Vec::with_capacity(idx.len());
            for &i in idx {
                features.extend_from_slice(ds.x_row(i));
                targets.push(target(i));
            }
            let model = learners::fit(spec, &features, idx.len(), d, &targets, task)
                .map_err(|e| Error::estimation(format!("fold {fold} {label}: {e}")))?;
            for flag in model.flags() {
                flags.push(format!("fold {fold} {label}: {flag}"));
            }
            for &i in &eval {
                dest[i] = model.predict(ds.x_row(i))?;
            }
            Ok(())
        };

        let y = ds.y();
        let a = ds.a();
        let z = ds.z();
        let mut flags = Vec::new();
        for zv in 0..2usize {
            let e_dest = if zv == 0 { &mut out.e0 } else { &mut out.e1 };
            fit_into(
                &z_cell[zv],
                &|i| y[i],
                FitTask::Regression,
                e_dest,
                &format!("e{zv}"),
                &mut flags,
            )?;
            let e1z_dest = if zv == 0 { &mut out.e10 } else { &mut out.e11 };
            fit_into(
                &a1z_cell[zv],
                &|i| y[i],
                FitTask::Regression,
                e1z_dest,
                &format!("e1{zv}"),
                &mut flags,
            )?;
            let p_dest = if zv == 0 { &mut out.p0 } else { &mut out.p1 };
            fit_into(
                &z_cell[zv],
                &|i| a[i] as f64,
                FitTask::Probability,
                p_dest,
                &format!("p{zv}"),
                &mut flags,
            )?;
            if need_single_arm {
                let m_dest = if zv == 0 {
                    out.m0.as_mut().unwrap()
                } else {
                    out.m1.as_mut().unwrap()
                };
                fit_into(
                    &z_cell[zv],
                    &|i| y[i] * (1.0 - a[i] as f64),
                    FitTask::Regression,
                    m_dest,
                    &format!("m{zv}"),
                    &mut flags,
                )?;
            }
        }
        fit_into(
            &train,
            &|i| z[i] as f64,
            FitTask::Probability,
            &mut out.pi1,
            "pi1",
            &mut flags,
        )?;
        out.flags.extend(flags);
    }

    Ok(out)
}

fn oracle_passthrough(
    ds: &Dataset,
    er: crate::simulation::dgp::ErMode,
    need_single_arm: bool,
) -> Result<RawNuisances> {
    if ds.d() != 2 {
        return Err(Error::invalid(
            "oracle nuisances require the 2-covariate simulation layout",
        ));
    }
    let n = ds.n();
    let points = crate::exec::map_indexed(crate::exec::ExecMode::Parallel, n, |i| {
        let xr = ds.x_row(i);
        oracle::nuisances_at(xr[0], xr[1], er)
    });
    let mut out = RawNuisances {
        e0: Vec::with_capacity(n),
        e1: Vec::with_capacity(n),
        e10: Vec::with_capacity(n),
        e11: Vec::with_capacity(n),
        p0: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
        pi1: Vec::with_capacity(n),
        m0: need_single_arm.then(|| Vec::with_capacity(n)),
        m1: need_single_arm.then(|| Vec::with_capacity(n)),
        flags: Vec::new(),
    };
    for p in points {
        let p = p?;
        out.e0.push(p.e0);
        out.e1.push(p.e1);
        out.e10.push(p.e10);
        out.e11.push(p.e11);
        out.p0.push(p.p0);
        out.p1.push(p.p1);
        out.pi1.push(p.pi1);
        if let Some(m0) = &mut out.m0 {
            m0.push(p.m0.expect("oracle supplies m0"));
        }
        if let Some(m1) = &mut out.m1 {
            m1.push(p.m1.expect("oracle supplies m1"));
        }
    }
    Ok(out)
}
