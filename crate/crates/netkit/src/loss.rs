//! Soft Dice loss over `(batch, class)` pairs:
//!
//! `L = mean_{b,c} [1 - (2 Σ p g + eps) / (Σ p + Σ g + eps)]`
//!
//! with sums over voxels and `eps` added to numerator and denominator.

use crate::error::{Error, Result};
use crate::tensor::Tensor5;

fn check(pred: &Tensor5, target: &Tensor5) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if let Some(v) = pred.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::OutOfRange(format!("prediction value {v} outside [0, 1]")));
    }
    if let Some(v) = target.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::OutOfRange(format!("target value {v} is not one-hot")));
    }
    let [n, c, ..] = target.shape();
    let len = target.spatial_len();
    for b in 0..n {
        for v in 0..len {
            let hot: f64 = (0..c).map(|ch| target.channel(b, ch)[v]).sum();
            if hot != 1.0 {
                return Err(Error::OutOfRange(format!("target voxel {v} of sample {b} is not one-hot")));
            }
        }
    }
    Ok(())
}

fn eps_ok(eps: f64) -> bool {
    eps >= 0.0 && eps.is_finite()
}

/// Per `(batch, class)`: `(Σ p g, Σ p + Σ g)`.
fn sums(pred: &[f64], target: &[f64], len: usize) -> Vec<(f64, f64)> {
    pred.chunks(len)
        .zip(target.chunks(len))
        .map(|(p, g)| {
            let inter = p.iter().zip(g).map(|(a, b)| a * b).sum();
            let total = p.iter().sum::<f64>() + g.iter().sum::<f64>();
            (inter, total)
        })
        .collect()
}

/// Loss without range checks, so finite differences can step outside [0, 1].
pub(crate) fn soft_dice_loss_raw(pred: &[f64], target: &[f64], len: usize, eps: f64) -> f64 {
    let s = sums(pred, target, len);
    let terms = s.len() as f64;
    s.iter().map(|&(i, t)| 1.0 - (2.0 * i + eps) / (t + eps)).sum::<f64>() / terms
}

pub(crate) fn soft_dice_grad_raw(pred: &[f64], target: &[f64], len: usize, eps: f64) -> Vec<f64> {
    let s = sums(pred, target, len);
    let terms = s.len() as f64;
    let mut grad = Vec::with_capacity(pred.len());
    for (k, &(inter, total)) in s.iter().enumerate() {
        let denom = total + eps;
        let num = 2.0 * inter + eps;
        for &g in &target[k * len..(k + 1) * len] {
            grad.push(-(2.0 * g * denom - num) / (denom * denom) / terms);
        }
    }
    grad
}

fn check_eps(eps: f64) -> Result<()> {
    if !eps_ok(eps) {
        return Err(Error::OutOfRange(format!("eps {eps} must be finite and non-negative")));
    }
    Ok(())
}

/// `pred` holds probabilities, `target` a one-hot encoding along channels.
pub fn soft_dice_loss(pred: &Tensor5, target: &Tensor5, eps: f64) -> Result<f64> {
    check(pred, target)?;
    check_eps(eps)?;
    let loss = soft_dice_loss_raw(pred.data(), target.data(), pred.spatial_len(), eps);
    if !loss.is_finite() {
        return Err(Error::OutOfRange("loss is undefined (empty masks with eps = 0)".into()));
    }
    Ok(loss)
}

/// `∂L/∂p_i = -(2 g_i (S + eps) - (2 I + eps)) / (S + eps)² / (B·C)`,
/// where `I = Σ p g` and `S = Σ p + Σ g` over the voxel's `(batch, class)`.
pub fn soft_dice_grad(pred: &Tensor5, target: &Tensor5, eps: f64) -> Result<Tensor5> {
    check(pred, target)?;
    check_eps(eps)?;
    let grad = soft_dice_grad_raw(pred.data(), target.data(), pred.spatial_len(), eps);
    Tensor5::new(pred.shape(), grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot(labels: &[usize], classes: usize, spatial: [usize; 3]) -> Tensor5 {
        Tensor5::from_fn([1, classes, spatial[0], spatial[1], spatial[2]], |_, c, z, y, x| {
            f64::from(u8::from(labels[(z * spatial[1] + y) * spatial[2] + x] == c))
        })
        .unwrap()
    }

    #[test]
    fn closed_forms() {
        // A single-class target of [1, 0] is not one-hot, so use the raw form.
        assert_eq!(soft_dice_loss_raw(&[0.5, 0.5], &[1.0, 0.0], 2, 0.0), 0.5);

        let t = one_hot(&[0, 1, 1, 0], 2, [1, 2, 2]);
        assert!(soft_dice_loss(&t, &t, 1e-5).unwrap() < 1e-6);
        let zeros = Tensor5::zeros(t.shape());
        let l = soft_dice_loss(&zeros, &t, 1e-9).unwrap();
        assert!((l - 1.0).abs() < 1e-8);
    }

    #[test]
    fn input_checks() {
        let t = one_hot(&[0, 1], 2, [1, 1, 2]);
        let bad = Tensor5::new(t.shape(), vec![1.5, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(soft_dice_loss(&bad, &t, 1e-5), Err(Error::OutOfRange(_))));
        let not_hot = Tensor5::new(t.shape(), vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(soft_dice_loss(&t, &not_hot, 1e-5), Err(Error::OutOfRange(_))));
        assert!(matches!(
            soft_dice_loss(&Tensor5::zeros([1, 2, 1, 1, 1]), &t, 1e-5),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(soft_dice_grad(&t, &t, -1.0).is_err());
    }

    #[test]
    fn gradient_at_the_target_matches_finite_differences() {
        // pred == target sits on the boundary of [0,1]; the raw loss lets the
        // central difference step across it.
        let t = one_hot(&[0, 1, 2, 1, 0, 0, 2, 1], 3, [2, 2, 2]);
        let eps = 1e-5;
        let len = t.spatial_len();
        let grad = soft_dice_grad_raw(t.data(), t.data(), len, eps);
        let h = 1e-4;
        let mut probe = t.data().to_vec();
        for i in 0..probe.len() {
            probe[i] += h;
            let up = soft_dice_loss_raw(&probe, t.data(), len, eps);
            probe[i] -= 2.0 * h;
            let down = soft_dice_loss_raw(&probe, t.data(), len, eps);
            probe[i] += h;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-4 * grad[i].abs().max(1e-8), "{i}: {fd} vs {}", grad[i]);
        }
        // Not zero: raising a foreground probability past 1 would still
        // lower the loss, lowering a background one below 0 likewise.
        assert!(grad.iter().all(|g| g.abs() > 0.0));
    }

    #[test]
    fn permutation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<usize> = (0..27).map(|_| rng.gen_range(0..2)).collect();
        let t = one_hot(&labels, 2, [3, 3, 3]);
        let p = Tensor5::from_fn(t.shape(), |_, _, _, _, _| rng.gen_range(0.0..1.0)).unwrap();
        let perm: Vec<usize> = (0..27).map(|v| (v * 10) % 27).collect();
        let permute = |x: &Tensor5| {
            Tensor5::from_fn(x.shape(), |b, c, z, y, xx| {
                let v = perm[(z * 3 + y) * 3 + xx];
                x.channel(b, c)[v]
            })
            .unwrap()
        };
        let a = soft_dice_loss(&p, &t, 1e-5).unwrap();
        let b = soft_dice_loss(&permute(&p), &permute(&t), 1e-5).unwrap();
        assert!((a - b).abs() < 1e-14);
    }
}
