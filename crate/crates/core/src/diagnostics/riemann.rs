//! Exact solution of the Riemann problem for the 1D Euler equations of an
//! ideal gas (two-wave pressure iteration, shock or rarefaction on each side).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerState {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

impl EulerState {
    fn sound_speed(&self, gamma: f64) -> f64 {
        (gamma * self.p / self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub left: EulerState,
    pub right: EulerState,
    pub gamma: f64,
    pub p_star: f64,
    pub u_star: f64,
}

/// Pressure function f_K(p) and its derivative for one side.
fn pressure_function(p: f64, s: &EulerState, gamma: f64) -> (f64, f64) {
    let a = s.sound_speed(gamma);
    if p > s.p {
        let ak = 2.0 / ((gamma + 1.0) * s.rho);
        let bk = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let q = (ak / (p + bk)).sqrt();
        let f = (p - s.p) * q;
        (f, q * (1.0 - 0.5 * (p - s.p) / (bk + p)))
    } else {
        let e = (gamma - 1.0) / (2.0 * gamma);
        let ratio = p / s.p;
        let f = 2.0 * a / (gamma - 1.0) * (ratio.powf(e) - 1.0);
        (f, 1.0 / (s.rho * a) * ratio.powf(-(gamma + 1.0) / (2.0 * gamma)))
    }
}

impl RiemannSolution {
    pub fn solve(left: EulerState, right: EulerState, gamma: f64) -> Result<Self> {
        for s in [&left, &right] {
            if !(s.rho > 0.0) || !(s.p > 0.0) {
                return Err(Error::invalid("Riemann states need positive density and pressure"));
            }
        }
        let (al, ar) = (left.sound_speed(gamma), right.sound_speed(gamma));
        let du = right.u - left.u;
        if 2.0 / (gamma - 1.0) * (al + ar) <= du {
            return Err(Error::RiemannVacuum);
        }
        // Two-rarefaction initial guess.
        let e = (gamma - 1.0) / (2.0 * gamma);
        let guess = ((al + ar - 0.5 * (gamma - 1.0) * du) / (al / left.p.powf(e) + ar / right.p.powf(e))).powf(1.0 / e);
        let mut p = guess.max(1e-12 * left.p.min(right.p));
        for _ in 0..200 {
            let (fl, dl) = pressure_function(p, &left, gamma);
            let (fr, dr) = pressure_function(p, &right, gamma);
            let next = (p - (fl + fr + du) / (dl + dr)).max(1e-14 * p);
            let change = 2.0 * (next - p).abs() / (next + p);
            p = next;
            if change < 1e-15 {
                break;
            }
        }
        let (fl, _) = pressure_function(p, &left, gamma);
        let (fr, _) = pressure_function(p, &right, gamma);
        Ok(RiemannSolution {
            left,
            right,
            gamma,
            p_star: p,
            u_star: 0.5 * (left.u + right.u) + 0.5 * (fr - fl),
        })
    }

    /// |f_L(p*) + f_R(p*) + Δu| relative to the sound-speed scale.
    pub fn pressure_residual(&self) -> f64 {
        let (fl, _) = pressure_function(self.p_star, &self.left, self.gamma);
        let (fr, _) = pressure_function(self.p_star, &self.right, self.gamma);
        let scale = self.left.sound_speed(self.gamma) + self.right.sound_speed(self.gamma);
        (fl + fr + self.right.u - self.left.u).abs() / scale
    }

    /// State at similarity coordinate s = (x − x₀)/t.
    pub fn sample(&self, s: f64) -> EulerState {
        let g = self.gamma;
        let (ps, us) = (self.p_star, self.u_star);
        if s <= us {
            let l = self.left;
            let al = l.sound_speed(g);
            if ps > l.p {
                let ratio = ps / l.p;
                let speed = l.u - al * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                if s <= speed {
                    l
                } else {
                    let gm = (g - 1.0) / (g + 1.0);
                    EulerState {
                        rho: l.rho * (ratio + gm) / (gm * ratio + 1.0),
                        u: us,
                        p: ps,
                    }
                }
            } else {
                let head = l.u - al;
                let a_star = al * (ps / l.p).powf((g - 1.0) / (2.0 * g));
                let tail = us - a_star;
                if s <= head {
                    l
                } else if s >= tail {
                    EulerState {
                        rho: l.rho * (ps / l.p).powf(1.0 / g),
                        u: us,
                        p: ps,
                    }
                } else {
                    let c = 2.0 / (g + 1.0) + (g - 1.0) / ((g + 1.0) * al) * (l.u - s);
                    EulerState {
                        rho: l.rho * c.powf(2.0 / (g - 1.0)),
                        u: 2.0 / (g + 1.0) * (al + 0.5 * (g - 1.0) * l.u + s),
                        p: l.p * c.powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        } else {
            let r = self.right;
            let ar = r.sound_speed(g);
            if ps > r.p {
                let ratio = ps / r.p;
                let speed = r.u + ar * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                if s >= speed {
                    r
                } else {
                    let gm = (g - 1.0) / (g + 1.0);
                    EulerState {
                        rho: r.rho * (ratio + gm) / (gm * ratio + 1.0),
                        u: us,
                        p: ps,
                    }
                }
            } else {
                let head = r.u + ar;
                let a_star = ar * (ps / r.p).powf((g - 1.0) / (2.0 * g));
                let tail = us + a_star;
                if s >= head {
                    r
                } else if s <= tail {
                    EulerState {
                        rho: r.rho * (ps / r.p).powf(1.0 / g),
                        u: us,
                        p: ps,
                    }
                } else {
                    let c = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * ar) * (r.u - s);
                    EulerState {
                        rho: r.rho * c.powf(2.0 / (g - 1.0)),
                        u: 2.0 / (g + 1.0) * (-ar + 0.5 * (g - 1.0) * r.u + s),
                        p: r.p * c.powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        }
    }

    /// States at positions `xs` at time `t` for a discontinuity initially at `x0`.
    pub fn profile(&self, xs: &[f64], x0: f64, t: f64) -> Vec<EulerState> {
        xs.iter()
            .map(|&x| {
                if t > 0.0 {
                    self.sample((x - x0) / t)
                } else if x <= x0 {
                    self.left
                } else {
                    self.right
                }
            })
            .collect()
    }

    /// Positions at time t where the solution is discontinuous (shock and contact).
    pub fn discontinuities(&self, x0: f64, t: f64) -> Vec<f64> {
        let g = self.gamma;
        let mut out = vec![x0 + self.u_star * t];
        for (state, sign) in [(self.left, -1.0), (self.right, 1.0)] {
            if self.p_star > state.p {
                let a = state.sound_speed(g);
                let ratio = self.p_star / state.p;
                let speed = state.u + sign * a * ((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g)).sqrt();
                out.push(x0 + speed * t);
            }
        }
        out
    }
}
