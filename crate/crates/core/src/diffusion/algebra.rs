//! v-prediction algebra and the deterministic DDIM update.

use crate::diffusion::latent::LatentVideo;
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::parallel;

fn level(schedule: &NoiseSchedule, t: usize) -> Result<(f64, f64)> {
    if t > schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "timestep {t} outside schedule of {} steps",
            schedule.steps()
        )));
    }
    Ok((schedule.alpha(t), schedule.sigma(t)))
}

/// `z_t = α_t z₀ + σ_t ε`.
pub fn forward_diffuse(z0: &LatentVideo, eps: &LatentVideo, t: usize, schedule: &NoiseSchedule) -> Result<LatentVideo> {
    z0.check_shape(eps, "forward_diffuse")?;
    let (a, s) = level(schedule, t)?;
    Ok(LatentVideo::from_fn_like(z0, |i| a * z0.data[i] + s * eps.data[i]))
}

/// `v_t = α_t ε − σ_t z₀`.
pub fn velocity_target(z0: &LatentVideo, eps: &LatentVideo, t: usize, schedule: &NoiseSchedule) -> Result<LatentVideo> {
    z0.check_shape(eps, "velocity_target")?;
    let (a, s) = level(schedule, t)?;
    Ok(LatentVideo::from_fn_like(z0, |i| a * eps.data[i] - s * z0.data[i]))
}

/// `ẑ₀ = α_t z_t − σ_t v`.
pub fn latent_estimate(z_t: &LatentVideo, v: &LatentVideo, t: usize, schedule: &NoiseSchedule) -> Result<LatentVideo> {
    z_t.check_shape(v, "latent_estimate")?;
    let (a, s) = level(schedule, t)?;
    Ok(LatentVideo::from_fn_like(z_t, |i| a * z_t.data[i] - s * v.data[i]))
}

const LOSS_CHUNK: usize = 8192;

/// Mean squared error. Partial sums over fixed chunks are combined in order,
/// so the result does not depend on the thread count.
pub fn vpred_loss(pred: &LatentVideo, target: &LatentVideo) -> Result<f64> {
    pred.check_shape(target, "vpred_loss")?;
    let n = pred.data.len();
    let chunks = n.div_ceil(LOSS_CHUNK);
    let partial = parallel::map_range(chunks, |c| {
        let r = c * LOSS_CHUNK..((c + 1) * LOSS_CHUNK).min(n);
        pred.data[r.clone()]
            .iter()
            .zip(&target.data[r])
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
    });
    Ok(partial.iter().sum::<f64>() / n as f64)
}

/// Gradient of [`vpred_loss`] with respect to `pred`.
pub fn vpred_loss_grad(pred: &LatentVideo, target: &LatentVideo) -> Result<LatentVideo> {
    pred.check_shape(target, "vpred_loss_grad")?;
    let k = 2.0 / pred.data.len() as f64;
    Ok(LatentVideo::from_fn_like(pred, |i| k * (pred.data[i] - target.data[i])))
}

/// Deterministic (η = 0) DDIM step from level `t` to `t_prev` around `z0_hat`.
pub fn ddim_step(
    z_t: &LatentVideo,
    z0_hat: &LatentVideo,
    t: usize,
    t_prev: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentVideo> {
    z_t.check_shape(z0_hat, "ddim_step")?;
    if t_prev >= t {
        return Err(Error::InvalidArgument(format!(
            "ddim_step must move toward clean data (t={t}, t_prev={t_prev})"
        )));
    }
    let (a, s) = level(schedule, t)?;
    let (ap, sp) = level(schedule, t_prev)?;
    Ok(LatentVideo::from_fn_like(z_t, |i| {
        let eps = if s > 0.0 { (z_t.data[i] - a * z0_hat.data[i]) / s } else { 0.0 };
        ap * z0_hat.data[i] + sp * eps
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::{make_schedule, ScheduleKind};

    fn sched() -> NoiseSchedule {
        make_schedule(ScheduleKind::Cosine, 1000).unwrap()
    }

    #[test]
    fn clean_endpoint() {
        let s = sched();
        let z0 = LatentVideo::gaussian(1, 2, 3, 3, 1);
        let eps = LatentVideo::gaussian(1, 2, 3, 3, 2);
        assert_eq!(forward_diffuse(&z0, &eps, 0, &s).unwrap(), z0);
        assert_eq!(velocity_target(&z0, &eps, 0, &s).unwrap(), eps);
        assert_eq!(latent_estimate(&z0, &eps, 0, &s).unwrap(), z0);
        let zero = LatentVideo::zeros(1, 2, 3, 3);
        let zt = forward_diffuse(&zero, &eps, 300, &s).unwrap();
        for (a, b) in zt.data.iter().zip(&eps.data) {
            assert_eq!(*a, s.sigma(300) * b);
        }
        let v = velocity_target(&z0, &zero, 300, &s).unwrap();
        for (a, b) in v.data.iter().zip(&z0.data) {
            assert_eq!(*a, -s.sigma(300) * b);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let s = sched();
        let a = LatentVideo::zeros(1, 1, 2, 2);
        let b = LatentVideo::zeros(1, 1, 2, 3);
        assert!(matches!(forward_diffuse(&a, &b, 1, &s), Err(Error::ShapeMismatch { .. })));
        assert!(vpred_loss(&a, &b).is_err());
        assert!(ddim_step(&a, &a, 3, 3, &s).is_err());
    }

    #[test]
    fn loss_values() {
        let p = LatentVideo::gaussian(2, 3, 4, 4, 3);
        assert_eq!(vpred_loss(&p, &p).unwrap(), 0.0);
        let q = LatentVideo::from_fn_like(&p, |i| p.data[i] + 1.0);
        assert!((vpred_loss(&q, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ddim_terminal_and_noise_free() {
        let s = sched();
        let z0 = LatentVideo::gaussian(1, 3, 4, 4, 5);
        let zt = LatentVideo::gaussian(1, 3, 4, 4, 6);
        assert_eq!(ddim_step(&zt, &z0, 500, 0, &s).unwrap(), z0);
        let scaled = LatentVideo::from_fn_like(&z0, |i| s.alpha(500) * z0.data[i]);
        let next = ddim_step(&scaled, &z0, 500, 200, &s).unwrap();
        for (a, b) in next.data.iter().zip(&z0.data) {
            assert!((a - s.alpha(200) * b).abs() < 1e-15);
        }
    }
}
