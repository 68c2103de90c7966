//! Riemannian trust-region method with a Steihaug-Toint truncated conjugate
//! gradient inner solver.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::manifold::{CostModel, Manifold};

/// Solver knobs. `None` radii and inner caps are derived from the manifold
/// dimension when the solve starts.
#[derive(Clone, Debug, PartialEq)]
pub struct TrConfig {
    pub max_outer_iters: usize,
    /// Stop once the Riemannian gradient norm drops below this.
    pub grad_tol: f64,
    pub initial_radius: Option<f64>,
    pub max_radius: Option<f64>,
    pub tcg_max_iters: Option<usize>,
    pub tcg_kappa: f64,
    pub tcg_theta: f64,
    pub rho_accept: f64,
    pub rho_shrink_threshold: f64,
    pub rho_expand_threshold: f64,
    pub seed: u64,
}

impl Default for TrConfig {
    fn default() -> Self {
        TrConfig {
            max_outer_iters: 200,
            grad_tol: 1e-6,
            initial_radius: None,
            max_radius: None,
            tcg_max_iters: None,
            tcg_kappa: 0.1,
            tcg_theta: 1.0,
            rho_accept: 0.1,
            rho_shrink_threshold: 0.25,
            rho_expand_threshold: 0.75,
            seed: 0,
        }
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<()> {
        let ok_rho = 0.0 < self.rho_accept
            && self.rho_accept <= self.rho_shrink_threshold
            && self.rho_shrink_threshold < self.rho_expand_threshold
            && self.rho_expand_threshold < 1.0;
        if !ok_rho {
            return Err(Error::Config(format!(
                "need 0 < rho_accept <= rho_shrink < rho_expand < 1, got {} {} {}",
                self.rho_accept, self.rho_shrink_threshold, self.rho_expand_threshold
            )));
        }
        for (name, r) in [("initial_radius", self.initial_radius), ("max_radius", self.max_radius)] {
            if let Some(r) = r {
                if r.is_nan() || r <= 0.0 {
                    return Err(Error::Config(format!("{name} must be positive, got {r}")));
                }
            }
        }
        if self.grad_tol.is_nan() || self.grad_tol < 0.0 {
            return Err(Error::Config(format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        if self.tcg_kappa <= 0.0 || self.tcg_theta < 0.0 {
            return Err(Error::Config("tcg_kappa must be > 0 and tcg_theta >= 0".into()));
        }
        Ok(())
    }

    fn radii(&self, dim: usize) -> (f64, f64) {
        let max = self.max_radius.unwrap_or_else(|| (dim.max(1) as f64).sqrt());
        let initial = self.initial_radius.unwrap_or(max / 8.0).min(max);
        (initial, max)
    }

    fn inner_cap(&self, dim: usize) -> usize {
        self.tcg_max_iters.unwrap_or_else(|| dim.clamp(1, 100))
    }
}

/// Why the truncated CG inner solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcgStop {
    NegativeCurvature,
    ExceededRadius,
    ReachedTarget,
    ModelIncreased,
    MaxIters,
}

impl fmt::Display for TcgStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TcgStop::NegativeCurvature => "negative_curvature",
            TcgStop::ExceededRadius => "exceeded_radius",
            TcgStop::ReachedTarget => "reached_target",
            TcgStop::ModelIncreased => "model_increased",
            TcgStop::MaxIters => "max_iters",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TcgResult<V> {
    pub eta: V,
    pub heta: V,
    pub stop: TcgStop,
    pub iters: usize,
    /// Model value `<eta, g> + <eta, H eta> / 2` after every inner iteration.
    pub model_values: Vec<f64>,
}

/// Approximately minimizes `<eta, g> + <eta, H eta> / 2` over `||eta|| <= radius`.
pub fn truncated_cg<M: Manifold>(
    manifold: &M,
    x: &M::Point,
    grad: &M::Vector,
    radius: f64,
    max_iters: usize,
    kappa: f64,
    theta: f64,
    mut hess: impl FnMut(&M::Vector) -> Result<M::Vector>,
) -> Result<TcgResult<M::Vector>> {
    let zero = manifold.zero_vector(x);
    let mut eta = zero.clone();
    let mut heta = zero;
    let mut r = grad.clone();
    let mut e_pe = 0.0;
    let mut r_r = manifold.inner(x, &r, &r);
    let mut d_pd = r_r;
    let mut delta = manifold.lincomb(x, -1.0, &r, 0.0, &r);
    let mut e_pd = 0.0;
    let r0_norm = r_r.sqrt();
    let mut model_value = 0.0;
    let mut model_values = Vec::new();
    let radius2 = radius * radius;

    if r0_norm == 0.0 {
        return Ok(TcgResult {
            eta,
            heta,
            stop: TcgStop::ReachedTarget,
            iters: 0,
            model_values,
        });
    }

    let mut stop = TcgStop::MaxIters;
    let mut iters = 0;
    for j in 0..max_iters {
        iters = j + 1;
        let hdelta = hess(&delta)?;
        let d_hd = manifold.inner(x, &delta, &hdelta);
        let alpha = r_r / d_hd;
        let e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd;

        if d_hd <= 0.0 || e_pe_new >= radius2 || !alpha.is_finite() {
            let tau = (-e_pd + (e_pd * e_pd + d_pd * (radius2 - e_pe)).max(0.0).sqrt()) / d_pd;
            eta = manifold.lincomb(x, 1.0, &eta, tau, &delta);
            heta = manifold.lincomb(x, 1.0, &heta, tau, &hdelta);
            model_value = manifold.inner(x, &eta, grad) + 0.5 * manifold.inner(x, &eta, &heta);
            model_values.push(model_value);
            stop = if d_hd <= 0.0 {
                TcgStop::NegativeCurvature
            } else {
                TcgStop::ExceededRadius
            };
            break;
        }

        e_pe = e_pe_new;
        let new_eta = manifold.lincomb(x, 1.0, &eta, alpha, &delta);
        let new_heta = manifold.lincomb(x, 1.0, &heta, alpha, &hdelta);
        let new_model =
            manifold.inner(x, &new_eta, grad) + 0.5 * manifold.inner(x, &new_eta, &new_heta);
        if new_model >= model_value {
            stop = TcgStop::ModelIncreased;
            iters = j;
            break;
        }
        eta = new_eta;
        heta = new_heta;
        model_value = new_model;
        model_values.push(model_value);

        r = manifold.lincomb(x, 1.0, &r, alpha, &hdelta);
        r = manifold.project(x, &r);
        let r_norm = manifold.norm(x, &r);
        if r_norm <= r0_norm * r0_norm.powf(theta).min(kappa) {
            stop = TcgStop::ReachedTarget;
            break;
        }

        let r_r_old = r_r;
        r_r = manifold.inner(x, &r, &r);
        let beta = r_r / r_r_old;
        delta = manifold.lincomb(x, -1.0, &r, beta, &delta);
        delta = manifold.project(x, &delta);
        e_pd = beta * (e_pd + alpha * d_pd);
        d_pd = r_r + beta * beta * d_pd;
    }

    Ok(TcgResult {
        eta,
        heta,
        stop,
        iters,
        model_values,
    })
}

/// One outer iteration of the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct TrIteration {
    pub iter: usize,
    /// Cost of the current iterate after the accept/reject decision.
    pub cost: f64,
    pub grad_norm: f64,
    /// Radius after the update.
    pub radius: f64,
    pub rho: f64,
    /// `None` for the initial row.
    pub tcg_stop: Option<TcgStop>,
    pub tcg_iters: usize,
    pub accepted: bool,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrStop {
    GradientTolerance,
    MaxIterations,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrTrace {
    pub iterations: Vec<TrIteration>,
}

impl TrTrace {
    pub fn accepted_costs(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .filter(|it| it.accepted || it.tcg_stop.is_none())
            .map(|it| it.cost)
            .collect()
    }

    pub fn num_accepted(&self) -> usize {
        self.iterations.iter().filter(|it| it.accepted).count()
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |it| it.grad_norm)
    }

    /// CSV with header `iter,cost,gradnorm,radius,rho,tcg_reason,seconds`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,cost,gradnorm,radius,rho,tcg_reason,seconds")?;
        for it in &self.iterations {
            let reason = it.tcg_stop.map_or_else(|| "start".to_string(), |s| s.to_string());
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.6}",
                it.iter, it.cost, it.grad_norm, it.radius, it.rho, reason, it.seconds
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrOutput<P> {
    pub point: P,
    pub cost: f64,
    pub grad_norm: f64,
    pub stop: TrStop,
    pub trace: TrTrace,
}

/// Minimizes `cost` over `manifold` starting from `x0`.
pub fn solve<M, C>(manifold: &M, cost: &mut C, x0: M::Point, cfg: &TrConfig)
    -> Result<TrOutput<M::Point>>
where
    M: Manifold,
    C: CostModel<M>,
{
    cfg.validate()?;
    let start = Instant::now();
    let dim = manifold.dim();
    let (mut radius, max_radius) = cfg.radii(dim);
    let inner_cap = cfg.inner_cap(dim);

    let mut x = x0;
    let mut fx = cost.cost(&x)?;
    if !fx.is_finite() {
        return Err(Error::NonFinite(format!("initial cost {fx}")));
    }
    let mut egrad = cost.egrad(&x)?;
    let mut grad = manifold.egrad_to_rgrad(&x, &egrad);
    let mut grad_norm = manifold.norm(&x, &grad);
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite(format!("initial gradient norm {grad_norm}")));
    }

    let mut trace = TrTrace::default();
    trace.iterations.push(TrIteration {
        iter: 0,
        cost: fx,
        grad_norm,
        radius,
        rho: f64::NAN,
        tcg_stop: None,
        tcg_iters: 0,
        accepted: false,
        seconds: start.elapsed().as_secs_f64(),
    });

    let mut stop = TrStop::MaxIterations;
    for iter in 1..=cfg.max_outer_iters {
        if grad_norm < cfg.grad_tol {
            stop = TrStop::GradientTolerance;
            break;
        }

        let tcg = {
            let egrad_ref = &egrad;
            let x_ref = &x;
            let cost_ref = &mut *cost;
            truncated_cg(
                manifold,
                x_ref,
                &grad,
                radius,
                inner_cap,
                cfg.tcg_kappa,
                cfg.tcg_theta,
                |v| {
                    let eh = cost_ref.ehess(x_ref, v)?;
                    Ok(manifold.ehess_to_rhess(x_ref, egrad_ref, &eh, v))
                },
            )?
        };

        let candidate = match manifold.retract(&x, &tcg.eta) {
            Ok(p) => Some(p),
            Err(Error::DegenerateStep) => None,
            Err(e) => return Err(e),
        };
        let f_prop = match &candidate {
            Some(p) => {
                let f = cost.cost(p)?;
                f.is_finite().then_some(f)
            }
            None => None,
        };

        let (rho, accepted) = match f_prop {
            Some(f_prop) => {
                let reg = 1e-15 * fx.abs().max(1.0);
                let num = fx - f_prop + reg;
                let den = -manifold.inner(&x, &tcg.eta, &grad)
                    - 0.5 * manifold.inner(&x, &tcg.eta, &tcg.heta)
                    + reg;
                let rho = num / den;
                let model_decreased = den >= 0.0;
                let boundary = matches!(
                    tcg.stop,
                    TcgStop::NegativeCurvature | TcgStop::ExceededRadius
                );
                if rho < cfg.rho_shrink_threshold || !model_decreased || rho.is_nan() {
                    radius *= 0.25;
                } else if rho > cfg.rho_expand_threshold && boundary {
                    radius = (2.0 * radius).min(max_radius);
                }
                let accept = model_decreased && rho > cfg.rho_accept && f_prop <= fx;
                (rho, accept)
            }
            None => {
                radius *= 0.25;
                (f64::NAN, false)
            }
        };

        if accepted {
            x = candidate.expect("accepted step has a point");
            fx = f_prop.expect("accepted step has a cost");
            egrad = cost.egrad(&x)?;
            grad = manifold.egrad_to_rgrad(&x, &egrad);
            grad_norm = manifold.norm(&x, &grad);
        }

        trace.iterations.push(TrIteration {
            iter,
            cost: fx,
            grad_norm,
            radius,
            rho,
            tcg_stop: Some(tcg.stop),
            tcg_iters: tcg.iters,
            accepted,
            seconds: start.elapsed().as_secs_f64(),
        });

        if radius < 1e-300 {
            break;
        }
    }
    if grad_norm < cfg.grad_tol {
        stop = TrStop::GradientTolerance;
    }

    Ok(TrOutput {
        point: x,
        cost: fx,
        grad_norm,
        stop,
        trace,
    })
}
