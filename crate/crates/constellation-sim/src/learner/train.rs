//! Per-pixel sigmoid segmentation surrogate: forward pass, MSE loss,
//! analytic gradients, the Adam update, and IoU evaluation.
//!
//! The model scores each pixel from five features — the three standardized
//! bands, NDWI, and a binary in-bounding-box prompt — plus a bias. The
//! parameter vector is tiny, but the wire size used for transfer accounting
//! is configured independently so exchanges cost what a real checkpoint
//! would.

use serde::{Deserialize, Serialize};

use super::{Grid, TileSample};
use crate::error::{Result, SimError};

/// Per-pixel features: three bands, NDWI, and the box prompt.
pub const FEATURE_COUNT: usize = 5;
/// Feature weights plus one bias term.
pub const PARAM_COUNT: usize = FEATURE_COUNT + 1;

/// Default wire size of one exchanged checkpoint, bytes.
pub const DEFAULT_WIRE_SIZE_BYTES: u64 = 16_000_000;

/// Flat parameter vector (weights then bias) with an update counter and the
/// transfer-accounting size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<f64>,
    pub version: u64,
    pub wire_size_bytes: u64,
}

impl ModelParams {
    pub fn zeros(wire_size_bytes: u64) -> Self {
        ModelParams {
            weights: vec![0.0; PARAM_COUNT],
            version: 0,
            wire_size_bytes,
        }
    }
}

/// Adam moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn zeros(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Optimizer and batching configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            batch_size: 16,
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(SimError::InvalidInput("batch size must be >= 1".to_string()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SimError::InvalidInput(
                "learning rate must be positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(SimError::InvalidInput(
                "adam betas must lie in [0, 1)".to_string(),
            ));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Predicted water probability per pixel.
pub fn forward(params: &ModelParams, tile: &TileSample) -> Grid<f64> {
    debug_assert_eq!(params.weights.len(), PARAM_COUNT);
    let w = &params.weights;
    let (rows, cols) = tile.mask.shape();
    let mut out = Grid::new(rows, cols);
    let b0 = tile.bands[0].as_slice();
    let b1 = tile.bands[1].as_slice();
    let b2 = tile.bands[2].as_slice();
    let nd = tile.ndwi.as_slice();
    for row in 0..rows {
        for col in 0..cols {
            let i = row * cols + col;
            let inbox = if tile.bbox.contains(row, col) { 1.0 } else { 0.0 };
            let z = w[0] * b0[i] + w[1] * b1[i] + w[2] * b2[i] + w[3] * nd[i] + w[4] * inbox + w[5];
            out.as_mut_slice()[i] = sigmoid(z);
        }
    }
    out
}

/// Mean squared error between a prediction and the binary mask.
pub fn loss_mse(pred: &Grid<f64>, mask: &Grid<u8>) -> Result<f64> {
    if !pred.same_shape(mask) {
        return Err(SimError::ShapeMismatch {
            expected: format!("{:?}", pred.shape()),
            got: format!("{:?}", mask.shape()),
        });
    }
    let n = pred.len() as f64;
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .map(|(&p, &y)| {
            let r = p - y as f64;
            r * r
        })
        .sum();
    Ok(sum / n)
}

/// Gradient of the batch-mean MSE loss with respect to `[weights, bias]`,
/// together with the batch-mean loss itself.
pub fn batch_gradient(params: &ModelParams, batch: &[&TileSample]) -> (Vec<f64>, f64) {
    debug_assert!(!batch.is_empty());
    let w = &params.weights;
    let mut grad = vec![0.0; PARAM_COUNT];
    let mut loss_total = 0.0;
    for tile in batch {
        let (rows, cols) = tile.mask.shape();
        let n_px = (rows * cols) as f64;
        let b0 = tile.bands[0].as_slice();
        let b1 = tile.bands[1].as_slice();
        let b2 = tile.bands[2].as_slice();
        let nd = tile.ndwi.as_slice();
        let mask = tile.mask.as_slice();
        let mut tile_grad = [0.0; PARAM_COUNT];
        let mut tile_loss = 0.0;
        for row in 0..rows {
            let row_in_box = row >= tile.bbox.row_min && row <= tile.bbox.row_max;
            for col in 0..cols {
                let i = row * cols + col;
                let inbox = if row_in_box && col >= tile.bbox.col_min && col <= tile.bbox.col_max {
                    1.0
                } else {
                    0.0
                };
                let z = w[0] * b0[i]
                    + w[1] * b1[i]
                    + w[2] * b2[i]
                    + w[3] * nd[i]
                    + w[4] * inbox
                    + w[5];
                let p = sigmoid(z);
                let r = p - mask[i] as f64;
                tile_loss += r * r;
                // d(r²)/dz = 2·r·σ'(z), with σ'(z) = p(1-p).
                let g = 2.0 * r * p * (1.0 - p);
                tile_grad[0] += g * b0[i];
                tile_grad[1] += g * b1[i];
                tile_grad[2] += g * b2[i];
                tile_grad[3] += g * nd[i];
                tile_grad[4] += g * inbox;
                tile_grad[5] += g;
            }
        }
        for (acc, g) in grad.iter_mut().zip(tile_grad) {
            *acc += g / n_px;
        }
        loss_total += tile_loss / n_px;
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    (grad, loss_total * scale)
}

/// Gradient of the batch-mean MSE loss.
pub fn gradient(params: &ModelParams, batch: &[&TileSample]) -> Vec<f64> {
    batch_gradient(params, batch).0
}

/// One Adam update. Returns the new parameters (version incremented) and
/// moment state.
pub fn adam_step(
    params: &ModelParams,
    state: &AdamState,
    grad: &[f64],
    config: &TrainerConfig,
) -> Result<(ModelParams, AdamState)> {
    if grad.len() != params.weights.len() || state.m.len() != grad.len() {
        return Err(SimError::ShapeMismatch {
            expected: format!("{}", params.weights.len()),
            got: format!("{}", grad.len()),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(SimError::NonFinite("gradient".to_string()));
    }
    let t = state.t + 1;
    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut weights = params.weights.clone();
    let bc1 = 1.0 - config.beta1.powi(t as i32);
    let bc2 = 1.0 - config.beta2.powi(t as i32);
    for i in 0..grad.len() {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        weights[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps_adam);
    }
    Ok((
        ModelParams {
            weights,
            version: params.version + 1,
            wire_size_bytes: params.wire_size_bytes,
        },
        AdamState { m, v, t },
    ))
}

/// IoU of two binary grids; 1.0 when both are empty.
pub fn binary_iou(a: &Grid<u8>, b: &Grid<u8>) -> f64 {
    debug_assert!(a.same_shape(b));
    let mut intersection = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (x != 0, y != 0);
        if x && y {
            intersection += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    }
}

/// IoU of a probability map thresholded against the binary mask.
pub fn iou(pred: &Grid<f64>, mask: &Grid<u8>, threshold: f64) -> f64 {
    debug_assert!(pred.same_shape(mask));
    let mut binarized: Grid<u8> = Grid::new(pred.rows(), pred.cols());
    for (out, &p) in binarized.as_mut_slice().iter_mut().zip(pred.as_slice()) {
        *out = (p > threshold) as u8;
    }
    binary_iou(&binarized, mask)
}

/// Mean IoU and mean loss of the model over an evaluation set.
pub fn evaluate(params: &ModelParams, eval_set: &[TileSample]) -> Result<(f64, f64)> {
    if eval_set.is_empty() {
        return Err(SimError::InvalidInput("empty evaluation set".to_string()));
    }
    let mut iou_sum = 0.0;
    let mut loss_sum = 0.0;
    for tile in eval_set {
        let pred = forward(params, tile);
        iou_sum += iou(&pred, &tile.mask, 0.5);
        loss_sum += loss_mse(&pred, &tile.mask)?;
    }
    let n = eval_set.len() as f64;
    Ok((iou_sum / n, loss_sum / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::tiles::{generate_tile, TileGenConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_tile(seed: u64) -> TileSample {
        let cfg = TileGenConfig {
            tile_size: 24,
            ..TileGenConfig::default()
        };
        generate_tile(seed, 0, 0, &cfg)
    }

    fn params_from(weights: &[f64]) -> ModelParams {
        ModelParams {
            weights: weights.to_vec(),
            version: 0,
            wire_size_bytes: 100,
        }
    }

    #[test]
    fn zero_params_predict_half_everywhere() {
        let tile = small_tile(1);
        let pred = forward(&ModelParams::zeros(100), &tile);
        assert!(pred.as_slice().iter().all(|&p| (p - 0.5).abs() < 1e-15));
    }

    #[test]
    fn large_bias_saturates_predictions() {
        let tile = small_tile(2);
        let pred = forward(&params_from(&[0.0, 0.0, 0.0, 0.0, 0.0, 50.0]), &tile);
        assert!(pred.as_slice().iter().all(|&p| p > 1.0 - 1e-9));
    }

    #[test]
    fn box_prompt_drives_inside_outside_split() {
        let tile = small_tile(3);
        let pred = forward(&params_from(&[0.0, 0.0, 0.0, 0.0, 10.0, -5.0]), &tile);
        let inside = sigmoid(5.0);
        let outside = sigmoid(-5.0);
        for row in 0..pred.rows() {
            for col in 0..pred.cols() {
                let expected = if tile.bbox.contains(row, col) { inside } else { outside };
                assert!((pred.get(row, col) - expected).abs() < 1e-12);
            }
        }
        assert!((inside - 0.9933).abs() < 1e-4);
        assert!((outside - 0.0067).abs() < 1e-4);
    }

    #[test]
    fn loss_reference_values() {
        let mut pred: Grid<f64> = Grid::new(2, 2);
        let mut mask: Grid<u8> = Grid::new(2, 2);
        mask.as_mut_slice().fill(1);
        for (p, &y) in pred.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *p = y as f64;
        }
        assert_eq!(loss_mse(&pred, &mask).unwrap(), 0.0);

        pred.as_mut_slice().fill(0.5);
        assert!((loss_mse(&pred, &mask).unwrap() - 0.25).abs() < 1e-15);

        let half: Grid<u8> = Grid::from_vec(2, 2, vec![1, 1, 0, 0]);
        assert!((loss_mse(&pred, &half).unwrap() - 0.25).abs() < 1e-15);

        let wrong: Grid<f64> = Grid::new(2, 3);
        assert!(matches!(
            loss_mse(&wrong, &mask),
            Err(SimError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_at_perfect_prediction() {
        // A synthetic "tile" whose mask is empty and whose prediction is
        // saturated at ~0 via a large negative bias has residual ~0.
        let mut tile = small_tile(4);
        tile.mask.as_mut_slice().fill(0);
        let params = params_from(&[0.0, 0.0, 0.0, 0.0, 0.0, -60.0]);
        let grad = gradient(&params, &[&tile]);
        assert!(grad.iter().all(|g| g.abs() < 1e-20));
    }

    /// Central finite differences of the batch-mean loss; the independent
    /// oracle for the analytic gradient.
    fn fd_gradient(params: &ModelParams, batch: &[&TileSample], h: f64) -> Vec<f64> {
        let mut out = vec![0.0; params.weights.len()];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus.weights[i] += h;
            let mut minus = params.clone();
            minus.weights[i] -= h;
            let loss = |p: &ModelParams| {
                batch
                    .iter()
                    .map(|t| loss_mse(&forward(p, t), &t.mask).unwrap())
                    .sum::<f64>()
                    / batch.len() as f64
            };
            *slot = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
        out
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let tiles: Vec<TileSample> = (0..2).map(|k| small_tile(1000 + trial * 2 + k)).collect();
            let batch: Vec<&TileSample> = tiles.iter().collect();
            let weights: Vec<f64> = (0..PARAM_COUNT).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let params = params_from(&weights);
            let analytic = gradient(&params, &batch);
            let numeric = fd_gradient(&params, &batch, 1e-6);
            for (a, n) in analytic.iter().zip(&numeric) {
                let denom = n.abs().max(1e-8);
                assert!(
                    (a - n).abs() / denom < 1e-4,
                    "trial {trial}: analytic {a} vs numeric {n}"
                );
            }
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_tile_gradients() {
        let t0 = small_tile(7);
        let t1 = small_tile(8);
        let params = params_from(&[0.2, -0.1, 0.4, 0.9, -0.3, 0.05]);
        let both = gradient(&params, &[&t0, &t1]);
        let g0 = gradient(&params, &[&t0]);
        let g1 = gradient(&params, &[&t1]);
        for i in 0..PARAM_COUNT {
            assert!((both[i] - 0.5 * (g0[i] + g1[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_zero_gradient_is_identity_on_weights() {
        let params = params_from(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let state = AdamState::zeros(PARAM_COUNT);
        let (next, ns) = adam_step(&params, &state, &[0.0; PARAM_COUNT], &TrainerConfig::default())
            .unwrap();
        assert_eq!(next.weights, params.weights);
        assert_eq!(next.version, params.version + 1);
        assert_eq!(ns.t, 1);
    }

    #[test]
    fn adam_first_step_magnitude() {
        // Fresh state, single effective weight, g = 2.0, lr = 1e-3:
        // m̂ = 2, v̂ = 4, Δw = -lr·2/(2 + ε) ≈ -9.99999995e-4.
        let mut params = ModelParams::zeros(10);
        params.weights = vec![0.0];
        let state = AdamState::zeros(1);
        let cfg = TrainerConfig {
            learning_rate: 1e-3,
            ..TrainerConfig::default()
        };
        let (next, _) = adam_step(&params, &state, &[2.0], &cfg).unwrap();
        assert!((next.weights[0] + 9.99999995e-4).abs() < 1e-12);
    }

    #[test]
    fn adam_descends_under_constant_gradient() {
        let mut params = ModelParams::zeros(10);
        params.weights = vec![0.0];
        let mut state = AdamState::zeros(1);
        let cfg = TrainerConfig {
            learning_rate: 1e-3,
            ..TrainerConfig::default()
        };
        let mut prev = 0.0;
        for _ in 0..2 {
            let (p, s) = adam_step(&params, &state, &[1.3], &cfg).unwrap();
            assert!(p.weights[0] < prev);
            prev = p.weights[0];
            params = p;
            state = s;
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let params = ModelParams::zeros(10);
        let state = AdamState::zeros(PARAM_COUNT);
        let mut grad = [0.0; PARAM_COUNT];
        grad[2] = f64::NAN;
        assert!(matches!(
            adam_step(&params, &state, &grad, &TrainerConfig::default()),
            Err(SimError::NonFinite(_))
        ));
    }

    #[test]
    fn iou_reference_cases() {
        let tile = small_tile(5);
        let mut exact: Grid<f64> = Grid::new(tile.mask.rows(), tile.mask.cols());
        for (p, &y) in exact.as_mut_slice().iter_mut().zip(tile.mask.as_slice()) {
            *p = y as f64;
        }
        assert_eq!(iou(&exact, &tile.mask, 0.5), 1.0);

        // Disjoint 10×10 blocks.
        let mut a: Grid<u8> = Grid::new(20, 40);
        let mut b: Grid<u8> = Grid::new(20, 40);
        for r in 0..10 {
            for c in 0..10 {
                a.set(r, c, 1);
                b.set(r, c + 20, 1);
            }
        }
        assert_eq!(binary_iou(&a, &b), 0.0);

        // Overlapping blocks shifted by 5 columns: 50 / 150.
        let mut c: Grid<u8> = Grid::new(20, 40);
        for r in 0..10 {
            for col in 5..15 {
                c.set(r, col, 1);
            }
        }
        assert!((binary_iou(&a, &c) - 50.0 / 150.0).abs() < 1e-15);

        // Both empty.
        let e1: Grid<u8> = Grid::new(4, 4);
        let e2: Grid<u8> = Grid::new(4, 4);
        assert_eq!(binary_iou(&e1, &e2), 1.0);
    }

    #[test]
    fn evaluate_reference_cases() {
        let tile = small_tile(6);
        let params = params_from(&[0.3, -0.2, 0.1, 0.7, 0.4, -0.1]);
        let pred = forward(&params, &tile);
        let expected_iou = iou(&pred, &tile.mask, 0.5);
        let expected_loss = loss_mse(&pred, &tile.mask).unwrap();

        let single = evaluate(&params, std::slice::from_ref(&tile)).unwrap();
        assert_eq!(single, (expected_iou, expected_loss));

        let duplicated = evaluate(&params, &[tile.clone(), tile.clone()]).unwrap();
        assert!((duplicated.0 - expected_iou).abs() < 1e-15);
        assert!((duplicated.1 - expected_loss).abs() < 1e-15);

        assert!(evaluate(&params, &[]).is_err());
    }

    #[test]
    fn strong_ndwi_weights_segment_the_synthetic_set_perfectly() {
        // Water pixels carry NDWI ≈ 0.67 and land ≈ 0, so a steep NDWI
        // threshold at 1/3 separates them.
        let params = params_from(&[0.0, 0.0, 0.0, 30.0, 0.0, -10.0]);
        let cfg = TileGenConfig {
            tile_size: 32,
            ..TileGenConfig::default()
        };
        let set: Vec<TileSample> = (0..8).map(|i| generate_tile(21, 0, i, &cfg)).collect();
        let (mean_iou, mean_loss) = evaluate(&params, &set).unwrap();
        assert_eq!(mean_iou, 1.0);
        assert!(mean_loss < 0.25);
    }

    #[test]
    fn adam_training_reduces_loss_on_a_fixed_batch() {
        let cfg = TileGenConfig {
            tile_size: 24,
            ..TileGenConfig::default()
        };
        let tiles: Vec<TileSample> = (0..4).map(|i| generate_tile(77, 0, i, &cfg)).collect();
        let batch: Vec<&TileSample> = tiles.iter().collect();
        let trainer = TrainerConfig {
            learning_rate: 1e-3,
            ..TrainerConfig::default()
        };
        let mut params = ModelParams::zeros(100);
        let mut state = AdamState::zeros(PARAM_COUNT);
        let (_, initial_loss) = batch_gradient(&params, &batch);
        for _ in 0..200 {
            let (grad, _) = batch_gradient(&params, &batch);
            let (p, s) = adam_step(&params, &state, &grad, &trainer).unwrap();
            params = p;
            state = s;
        }
        let (_, final_loss) = batch_gradient(&params, &batch);
        assert!(
            final_loss < initial_loss,
            "loss {initial_loss} -> {final_loss}"
        );
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(bits_a in proptest::collection::vec(0u8..2, 36), bits_b in proptest::collection::vec(0u8..2, 36)) {
            let a = Grid::from_vec(6, 6, bits_a);
            let b = Grid::from_vec(6, 6, bits_b);
            let ab = binary_iou(&a, &b);
            let ba = binary_iou(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            if a.as_slice().contains(&1) {
                prop_assert_eq!(binary_iou(&a, &a), 1.0);
            }
        }
    }
}
