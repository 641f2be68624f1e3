use crate::error::{invalid, Result};

/// Triangle surrogate of half-width `gamma_width` for the spike function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub gamma_width: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { gamma_width: 1.0 }
    }
}

impl SurrogateConfig {
    pub fn new(gamma_width: f64) -> Result<Self> {
        if !(gamma_width > 0.0) || !gamma_width.is_finite() {
            return Err(invalid("surrogate width must be positive"));
        }
        Ok(SurrogateConfig { gamma_width })
    }
}

/// `(w - |v - theta|) / w^2` inside the window, 0 outside.
#[inline]
pub fn surrogate(v_s: f64, theta: f64, cfg: &SurrogateConfig) -> f64 {
    let w = cfg.gamma_width;
    let d = (v_s - theta).abs();
    if d < w {
        (w - d) / (w * w)
    } else {
        0.0
    }
}

/// Primitive of the triangle surrogate: a smooth step from 0 to 1 over
/// `(-w, w)` in `delta = v - theta`.
#[inline]
pub fn smooth_step(delta: f64, w: f64) -> f64 {
    if delta <= -w {
        0.0
    } else if delta <= 0.0 {
        (w + delta) * (w + delta) / (2.0 * w * w)
    } else if delta < w {
        1.0 - (w - delta) * (w - delta) / (2.0 * w * w)
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_values() {
        let c = SurrogateConfig::default();
        assert_eq!(surrogate(1.0, 1.0, &c), 1.0);
        assert_eq!(surrogate(2.0, 1.0, &c), 0.0);
        assert_eq!(surrogate(0.0, 1.0, &c), 0.0);
        assert_eq!(surrogate(1.5, 1.0, &c), 0.5);
        let narrow = SurrogateConfig::new(0.5).unwrap();
        assert_eq!(surrogate(1.25, 1.0, &narrow), 1.0);
        assert!(SurrogateConfig::new(0.0).is_err());
    }

    #[test]
    fn step_derivative_is_surrogate() {
        let c = SurrogateConfig::new(0.7).unwrap();
        let h = 1e-6;
        for i in -100..=100 {
            let d = i as f64 * 0.0123 + 0.0007;
            let fd = (smooth_step(d + h, 0.7) - smooth_step(d - h, 0.7)) / (2.0 * h);
            assert!((fd - surrogate(1.0 + d, 1.0, &c)).abs() < 1e-6);
        }
        assert_eq!(smooth_step(0.0, 1.0), 0.5);
        assert_eq!(smooth_step(-1.0, 1.0), 0.0);
        assert_eq!(smooth_step(1.0, 1.0), 1.0);
    }
}
