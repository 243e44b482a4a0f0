//! Method of moving asymptotes (Svanberg), general form with `m`
//! constraints:
//!
//! ```text
//! minimize   f₀(x) + a₀ z + Σ (cᵢ yᵢ + ½ dᵢ yᵢ²)
//! subject to fᵢ(x) − aᵢ z − yᵢ ≤ 0,   xmin ≤ x ≤ xmax,   y, z ≥ 0
//! ```
//!
//! Each call builds the convex separable approximation at the current
//! point and solves it with a primal-dual interior point method.

use crate::error::{Error, Result};
use crate::linalg::dense_solve;

/// Fixed constants of the MMA subproblem.
#[derive(Clone, Debug)]
pub struct MmaSettings {
    pub a0: f64,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    /// Move limit as a fraction of `xmax − xmin`.
    pub move_limit: f64,
    pub asymptote_init: f64,
    pub asymptote_increase: f64,
    pub asymptote_decrease: f64,
}

impl MmaSettings {
    /// Standard constants with `c = 1000`, `d = 1`, `a₀ = 1`.
    pub fn standard(a: Vec<f64>, move_limit: f64) -> Self {
        let m = a.len();
        MmaSettings {
            a0: 1.0,
            a,
            c: vec![1000.0; m],
            d: vec![1.0; m],
            move_limit,
            asymptote_init: 0.5,
            asymptote_increase: 1.2,
            asymptote_decrease: 0.7,
        }
    }
}

/// Iteration history carried between MMA calls.
#[derive(Clone, Debug)]
pub struct MmaState {
    pub settings: MmaSettings,
    pub xmin: Vec<f64>,
    pub xmax: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
    pub xold1: Vec<f64>,
    pub xold2: Vec<f64>,
    iter: usize,
}

/// Result of one MMA step.
#[derive(Clone, Debug)]
pub struct MmaStep {
    pub x: Vec<f64>,
    pub z: f64,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl MmaState {
    pub fn new(x0: &[f64], xmin: Vec<f64>, xmax: Vec<f64>, settings: MmaSettings) -> Self {
        MmaState {
            settings,
            low: xmin.clone(),
            upp: xmax.clone(),
            xmin,
            xmax,
            xold1: x0.to_vec(),
            xold2: x0.to_vec(),
            iter: 0,
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.settings.a.len()
    }

    /// One MMA step from `x` given the objective gradient and the constraint
    /// values and gradients (`dfdx[i]` is the gradient of constraint `i`).
    pub fn update(&mut self, x: &[f64], df0dx: &[f64], fval: &[f64], dfdx: &[Vec<f64>]) -> Result<MmaStep> {
        let n = x.len();
        let m = self.n_constraints();
        if df0dx.len() != n || fval.len() != m || dfdx.len() != m || dfdx.iter().any(|g| g.len() != n) {
            return Err(Error::Internal("MMA input sizes disagree".into()));
        }
        self.iter += 1;
        let s = &self.settings;
        let (raa0, albefa) = (1e-5, 0.1);

        // asymptotes
        for j in 0..n {
            let range = self.xmax[j] - self.xmin[j];
            if self.iter <= 2 {
                self.low[j] = x[j] - s.asymptote_init * range;
                self.upp[j] = x[j] + s.asymptote_init * range;
            } else {
                let trend = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if trend > 0.0 {
                    s.asymptote_increase
                } else if trend < 0.0 {
                    s.asymptote_decrease
                } else {
                    1.0
                };
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                self.low[j] = low.clamp(x[j] - 10.0 * range, x[j] - 0.01 * range);
                self.upp[j] = upp.clamp(x[j] + 0.01 * range, x[j] + 10.0 * range);
            }
        }

        // subproblem bounds and approximation coefficients
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut pm = vec![vec![0.0; n]; m];
        let mut qm = vec![vec![0.0; n]; m];
        let mut b = vec![0.0; m];
        for j in 0..n {
            let range = self.xmax[j] - self.xmin[j];
            alfa[j] = (self.low[j] + albefa * (x[j] - self.low[j]))
                .max(x[j] - s.move_limit * range)
                .max(self.xmin[j]);
            beta[j] = (self.upp[j] - albefa * (self.upp[j] - x[j]))
                .min(x[j] + s.move_limit * range)
                .min(self.xmax[j]);
            let xmami = range.max(1e-5);
            let ux2 = (self.upp[j] - x[j]).powi(2);
            let xl2 = (x[j] - self.low[j]).powi(2);
            let (pp, qq) = (df0dx[j].max(0.0), (-df0dx[j]).max(0.0));
            let pq = 0.001 * (pp + qq) + raa0 / xmami;
            p0[j] = (pp + pq) * ux2;
            q0[j] = (qq + pq) * xl2;
            for i in 0..m {
                let g = dfdx[i][j];
                let (pp, qq) = (g.max(0.0), (-g).max(0.0));
                let pq = 0.001 * (pp + qq) + raa0 / xmami;
                pm[i][j] = (pp + pq) * ux2;
                qm[i][j] = (qq + pq) * xl2;
                b[i] += pm[i][j] / (self.upp[j] - x[j]) + qm[i][j] / (x[j] - self.low[j]);
            }
        }
        for i in 0..m {
            b[i] -= fval[i];
        }

        let sub = Subproblem {
            low: &self.low,
            upp: &self.upp,
            alfa: &alfa,
            beta: &beta,
            p0: &p0,
            q0: &q0,
            p: &pm,
            q: &qm,
            b: &b,
            settings: s,
        };
        let step = sub.solve()?;
        self.xold2 = std::mem::replace(&mut self.xold1, x.to_vec());
        Ok(step)
    }
}

struct Subproblem<'a> {
    low: &'a [f64],
    upp: &'a [f64],
    alfa: &'a [f64],
    beta: &'a [f64],
    p0: &'a [f64],
    q0: &'a [f64],
    p: &'a [Vec<f64>],
    q: &'a [Vec<f64>],
    b: &'a [f64],
    settings: &'a MmaSettings,
}

/// Primal and dual variables of the subproblem.
#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
    lam: Vec<f64>,
    xsi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    zet: f64,
    s: Vec<f64>,
}

impl Subproblem<'_> {
    fn plam_qlam(&self, pt: &Point) -> (Vec<f64>, Vec<f64>) {
        let n = pt.x.len();
        let mut plam = self.p0.to_vec();
        let mut qlam = self.q0.to_vec();
        for (i, &l) in pt.lam.iter().enumerate() {
            for j in 0..n {
                plam[j] += self.p[i][j] * l;
                qlam[j] += self.q[i][j] * l;
            }
        }
        (plam, qlam)
    }

    fn gvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.p.len())
            .map(|i| {
                (0..x.len())
                    .map(|j| self.p[i][j] / (self.upp[j] - x[j]) + self.q[i][j] / (x[j] - self.low[j]))
                    .sum()
            })
            .collect()
    }

    fn residual(&self, pt: &Point, epsi: f64) -> Vec<f64> {
        let s = self.settings;
        let n = pt.x.len();
        let m = pt.y.len();
        let (plam, qlam) = self.plam_qlam(pt);
        let gvec = self.gvec(&pt.x);
        let mut r = Vec::with_capacity(3 * n + 4 * m + 2);
        for j in 0..n {
            let ux = self.upp[j] - pt.x[j];
            let xl = pt.x[j] - self.low[j];
            r.push(plam[j] / (ux * ux) - qlam[j] / (xl * xl) - pt.xsi[j] + pt.eta[j]);
        }
        for i in 0..m {
            r.push(s.c[i] + s.d[i] * pt.y[i] - pt.mu[i] - pt.lam[i]);
        }
        r.push(s.a0 - pt.zet - dot(&s.a, &pt.lam));
        for i in 0..m {
            r.push(gvec[i] - s.a[i] * pt.z - pt.y[i] + pt.s[i] - self.b[i]);
        }
        for j in 0..n {
            r.push(pt.xsi[j] * (pt.x[j] - self.alfa[j]) - epsi);
        }
        for j in 0..n {
            r.push(pt.eta[j] * (self.beta[j] - pt.x[j]) - epsi);
        }
        for i in 0..m {
            r.push(pt.mu[i] * pt.y[i] - epsi);
        }
        r.push(pt.zet * pt.z - epsi);
        for i in 0..m {
            r.push(pt.lam[i] * pt.s[i] - epsi);
        }
        r
    }

    fn solve(&self) -> Result<MmaStep> {
        let s = self.settings;
        let n = self.alfa.len();
        let m = self.b.len();
        let epsimin = 1e-7;
        let mut epsi = 1.0;
        let x: Vec<f64> = (0..n).map(|j| 0.5 * (self.alfa[j] + self.beta[j])).collect();
        let mut pt = Point {
            xsi: (0..n).map(|j| (1.0 / (x[j] - self.alfa[j])).max(1.0)).collect(),
            eta: (0..n).map(|j| (1.0 / (self.beta[j] - x[j])).max(1.0)).collect(),
            x,
            y: vec![1.0; m],
            z: 1.0,
            lam: vec![1.0; m],
            mu: s.c.iter().map(|&c| (0.5 * c).max(1.0)).collect(),
            zet: 1.0,
            s: vec![1.0; m],
        };

        while epsi > epsimin {
            let mut res = self.residual(&pt, epsi);
            let mut resnorm = norm(&res);
            let mut resmax = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut inner = 0;
            while resmax > 0.9 * epsi && inner < 200 {
                inner += 1;
                let dir = self.newton_direction(&pt, epsi)?;
                // step length keeping every positive variable positive
                let mut stmxx: f64 = 0.0;
                let pairs = |v: &[f64], d: &[f64], acc: &mut f64| {
                    for (a, b) in v.iter().zip(d) {
                        *acc = acc.max(-1.01 * b / a);
                    }
                };
                pairs(&pt.y, &dir.y, &mut stmxx);
                pairs(&[pt.z], &[dir.z], &mut stmxx);
                pairs(&pt.lam, &dir.lam, &mut stmxx);
                pairs(&pt.xsi, &dir.xsi, &mut stmxx);
                pairs(&pt.eta, &dir.eta, &mut stmxx);
                pairs(&pt.mu, &dir.mu, &mut stmxx);
                pairs(&[pt.zet], &[dir.zet], &mut stmxx);
                pairs(&pt.s, &dir.s, &mut stmxx);
                let mut stmalbe: f64 = 0.0;
                for j in 0..n {
                    stmalbe = stmalbe
                        .max(-1.01 * dir.x[j] / (pt.x[j] - self.alfa[j]))
                        .max(1.01 * dir.x[j] / (self.beta[j] - pt.x[j]));
                }
                let mut steg = 1.0 / stmxx.max(stmalbe).max(1.0);

                let old = pt.clone();
                let mut resnew = 2.0 * resnorm;
                let mut backtracks = 0;
                while resnew > resnorm && backtracks < 50 {
                    backtracks += 1;
                    pt = old.advanced(&dir, steg);
                    res = self.residual(&pt, epsi);
                    resnew = norm(&res);
                    steg /= 2.0;
                }
                resnorm = resnew;
                resmax = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            }
            epsi *= 0.1;
        }
        if pt.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("MMA subproblem diverged", f64::NAN));
        }
        Ok(MmaStep {
            x: pt.x,
            z: pt.z,
            y: pt.y,
            lambda: pt.lam,
        })
    }

    fn newton_direction(&self, pt: &Point, epsi: f64) -> Result<Point> {
        let s = self.settings;
        let n = pt.x.len();
        let m = pt.y.len();
        let (plam, qlam) = self.plam_qlam(pt);
        let gvec = self.gvec(&pt.x);
        let mut gg = vec![vec![0.0; n]; m];
        let mut delx = vec![0.0; n];
        let mut diagx = vec![0.0; n];
        for j in 0..n {
            let ux = self.upp[j] - pt.x[j];
            let xl = pt.x[j] - self.low[j];
            for i in 0..m {
                gg[i][j] = self.p[i][j] / (ux * ux) - self.q[i][j] / (xl * xl);
            }
            let dpsidx = plam[j] / (ux * ux) - qlam[j] / (xl * xl);
            delx[j] = dpsidx - epsi / (pt.x[j] - self.alfa[j]) + epsi / (self.beta[j] - pt.x[j]);
            diagx[j] = 2.0 * (plam[j] / (ux * ux * ux) + qlam[j] / (xl * xl * xl))
                + pt.xsi[j] / (pt.x[j] - self.alfa[j])
                + pt.eta[j] / (self.beta[j] - pt.x[j]);
        }
        let dely: Vec<f64> = (0..m)
            .map(|i| s.c[i] + s.d[i] * pt.y[i] - pt.lam[i] - epsi / pt.y[i])
            .collect();
        let delz = s.a0 - dot(&s.a, &pt.lam) - epsi / pt.z;
        let dellam: Vec<f64> = (0..m)
            .map(|i| gvec[i] - s.a[i] * pt.z - pt.y[i] - self.b[i] + epsi / pt.lam[i])
            .collect();
        let diagy: Vec<f64> = (0..m).map(|i| s.d[i] + pt.mu[i] / pt.y[i]).collect();
        let diaglamyi: Vec<f64> = (0..m).map(|i| pt.s[i] / pt.lam[i] + 1.0 / diagy[i]).collect();

        let (dx, dz, dlam);
        if m < n {
            // reduced system in (λ, z)
            let mut mat = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for i in 0..m {
                rhs[i] = dellam[i] + dely[i] / diagy[i]
                    - (0..n).map(|j| gg[i][j] * delx[j] / diagx[j]).sum::<f64>();
                for k in 0..m {
                    mat[i][k] = (0..n).map(|j| gg[i][j] * gg[k][j] / diagx[j]).sum();
                }
                mat[i][i] += diaglamyi[i];
                mat[i][m] = s.a[i];
                mat[m][i] = s.a[i];
            }
            mat[m][m] = -pt.zet / pt.z;
            rhs[m] = delz;
            let sol = dense_solve(mat, rhs)?;
            dlam = sol[..m].to_vec();
            dz = sol[m];
            dx = (0..n)
                .map(|j| -delx[j] / diagx[j] - (0..m).map(|i| gg[i][j] * dlam[i]).sum::<f64>() / diagx[j])
                .collect::<Vec<f64>>();
        } else {
            // reduced system in (x, z)
            let dellamyi: Vec<f64> = (0..m).map(|i| dellam[i] + dely[i] / diagy[i]).collect();
            let mut mat = vec![vec![0.0; n + 1]; n + 1];
            let mut rhs = vec![0.0; n + 1];
            for j in 0..n {
                for k in 0..n {
                    mat[j][k] = (0..m).map(|i| gg[i][j] * gg[i][k] / diaglamyi[i]).sum();
                }
                mat[j][j] += diagx[j];
                let axz = -(0..m).map(|i| gg[i][j] * s.a[i] / diaglamyi[i]).sum::<f64>();
                mat[j][n] = axz;
                mat[n][j] = axz;
                rhs[j] = -(delx[j] + (0..m).map(|i| gg[i][j] * dellamyi[i] / diaglamyi[i]).sum::<f64>());
            }
            mat[n][n] = pt.zet / pt.z + (0..m).map(|i| s.a[i] * s.a[i] / diaglamyi[i]).sum::<f64>();
            rhs[n] = -(delz - (0..m).map(|i| s.a[i] * dellamyi[i] / diaglamyi[i]).sum::<f64>());
            let sol = dense_solve(mat, rhs)?;
            dx = sol[..n].to_vec();
            dz = sol[n];
            dlam = (0..m)
                .map(|i| {
                    (0..n).map(|j| gg[i][j] * dx[j]).sum::<f64>() / diaglamyi[i] - dz * s.a[i] / diaglamyi[i]
                        + dellamyi[i] / diaglamyi[i]
                })
                .collect();
        }
        let dy: Vec<f64> = (0..m).map(|i| -dely[i] / diagy[i] + dlam[i] / diagy[i]).collect();
        Ok(Point {
            xsi: (0..n)
                .map(|j| {
                    let d = pt.x[j] - self.alfa[j];
                    -pt.xsi[j] + epsi / d - pt.xsi[j] * dx[j] / d
                })
                .collect(),
            eta: (0..n)
                .map(|j| {
                    let d = self.beta[j] - pt.x[j];
                    -pt.eta[j] + epsi / d + pt.eta[j] * dx[j] / d
                })
                .collect(),
            mu: (0..m)
                .map(|i| -pt.mu[i] + epsi / pt.y[i] - pt.mu[i] * dy[i] / pt.y[i])
                .collect(),
            zet: -pt.zet + epsi / pt.z - pt.zet * dz / pt.z,
            s: (0..m)
                .map(|i| -pt.s[i] + epsi / pt.lam[i] - pt.s[i] * dlam[i] / pt.lam[i])
                .collect(),
            x: dx,
            y: dy,
            z: dz,
            lam: dlam,
        })
    }
}

impl Point {
    fn advanced(&self, d: &Point, t: f64) -> Point {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * y).collect::<Vec<f64>>();
        Point {
            x: add(&self.x, &d.x),
            y: add(&self.y, &d.y),
            z: self.z + t * d.z,
            lam: add(&self.lam, &d.lam),
            xsi: add(&self.xsi, &d.xsi),
            eta: add(&self.eta, &d.eta),
            mu: add(&self.mu, &d.mu),
            zet: self.zet + t * d.zet,
            s: add(&self.s, &d.s),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
