use serde::Serialize;
use thiserror::Error;

use super::geometry::{spray_at, SpraySource};
use super::EngineError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeodesicError {
    #[error("trajectory left the domain at t = {t}")]
    DomainExit { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid start: {0}")]
    Start(EngineError),
    #[error("steps must be positive")]
    NoSteps,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// Fixed-step RK4 for `c' = v`, `v' = -2 G(c, v)`.
pub fn integrate_geodesic(
    source: &dyn SpraySource,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Vec<GeodesicSample>, GeodesicError> {
    if steps == 0 {
        return Err(GeodesicError::NoSteps);
    }
    spray_at(source, x0, y0).map_err(GeodesicError::Start)?;
    let n = x0.len();
    let h = t_end / steps as f64;
    let mut state: Vec<f64> = x0.iter().chain(y0).copied().collect();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(GeodesicSample {
        t: 0.0,
        x: x0.to_vec(),
        v: y0.to_vec(),
    });
    let rhs = |s: &[f64], t: f64| -> Result<Vec<f64>, GeodesicError> {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(GeodesicError::NonFinite { t });
        }
        let g = spray_at(source, &s[..n], &s[n..]).map_err(|e| match e {
            EngineError::NonFinite(_) => GeodesicError::NonFinite { t },
            _ => GeodesicError::DomainExit { t },
        })?;
        Ok(s[n..].iter().copied().chain(g.iter().map(|v| -2.0 * v)).collect())
    };
    let axpy = |s: &[f64], k: &[f64], a: f64| -> Vec<f64> {
        s.iter().zip(k).map(|(p, q)| p + a * q).collect()
    };
    for step in 0..steps {
        let t = step as f64 * h;
        let k1 = rhs(&state, t)?;
        let k2 = rhs(&axpy(&state, &k1, h / 2.0), t + h / 2.0)?;
        let k3 = rhs(&axpy(&state, &k2, h / 2.0), t + h / 2.0)?;
        let k4 = rhs(&axpy(&state, &k3, h), t + h)?;
        for (i, s) in state.iter_mut().enumerate() {
            *s += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = t + h;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(GeodesicError::NonFinite { t });
        }
        if !source.domain().contains(&state[..n]) {
            return Err(GeodesicError::DomainExit { t });
        }
        out.push(GeodesicSample {
            t,
            x: state[..n].to_vec(),
            v: state[n..].to_vec(),
        });
    }
    Ok(out)
}
