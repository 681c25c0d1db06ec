use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("value {value} at t = {time} is not positive")]
    NonPositiveValues { time: f64, value: f64 },
    #[error("need at least 10 samples after t = {t_start}, got {count}")]
    TooFewSamples { t_start: f64, count: usize },
}

/// Least-squares fit `v ≈ η e^{−αt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub alpha: f64,
    pub eta: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
}

/// Fits a straight line to `log(values)` over samples with `t ≥ t_start`.
pub fn fit_decay(times: &[f64], values: &[f64], t_start: f64) -> Result<DecayFit, FitError> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_start)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 10 {
        return Err(FitError::TooFewSamples { t_start, count: pts.len() });
    }
    if let Some(&(time, value)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(FitError::NonPositiveValues { time, value });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for (t, v) in &pts {
        let (dt, dl) = (t - mt, v.ln() - ml);
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    let slope = stl / stt;
    let intercept = ml - slope * mt;
    let r_squared = if sll == 0.0 { 1.0 } else { stl * stl / (stt * sll) };
    Ok(DecayFit { alpha: -slope, eta: intercept.exp(), r_squared })
}
