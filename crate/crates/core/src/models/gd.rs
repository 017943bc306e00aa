//! Full-batch gradient descent over a flat parameter vector, with
//! backtracking so the loss is non-increasing per accepted step.

pub(crate) struct GdConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Accept a step when new_loss <= old_loss + tol.
    pub tol: f64,
}

/// Runs `epochs` accepted steps of descent on `loss_grad`. When a step
/// would increase the loss beyond `tol` the rate is halved and the step
/// retried; descent stops early once the rate underflows.
pub(crate) fn descend<F>(params0: Vec<f64>, cfg: &GdConfig, mut loss_grad: F) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut params = params0;
    let (mut loss, mut grad) = loss_grad(&params);
    let mut lr = cfg.lr;
    'epochs: for _ in 0..cfg.epochs {
        loop {
            let cand: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - lr * g)
                .collect();
            let (cand_loss, cand_grad) = loss_grad(&cand);
            if cand_loss <= loss + cfg.tol {
                params = cand;
                loss = cand_loss;
                grad = cand_grad;
                break;
            }
            lr *= 0.5;
            if lr < 1e-14 {
                break 'epochs;
            }
        }
    }
    (params, loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // f(p) = (p0-3)^2 + 2(p1+1)^2
        let f = |p: &[f64]| {
            let l = (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2);
            (l, vec![2.0 * (p[0] - 3.0), 4.0 * (p[1] + 1.0)])
        };
        let (p, loss) = descend(
            vec![0.0, 0.0],
            &GdConfig {
                lr: 0.2,
                epochs: 200,
                tol: 1e-12,
            },
            f,
        );
        assert!((p[0] - 3.0).abs() < 1e-6);
        assert!((p[1] + 1.0).abs() < 1e-6);
        assert!(loss < 1e-10);
    }

    #[test]
    fn oversized_rate_backtracks_instead_of_diverging() {
        // lr of 40 on f(p)=p^2 would oscillate divergently without halving
        let f = |p: &[f64]| ((p[0]).powi(2), vec![2.0 * p[0]]);
        let (p, loss) = descend(
            vec![5.0],
            &GdConfig {
                lr: 40.0,
                epochs: 100,
                tol: 1e-12,
            },
            f,
        );
        assert!(p[0].abs() < 1e-6);
        assert!(loss.is_finite());
    }
}
