use super::{NetworkConfig, NetworkGradients, NetworkParams};

/// Euclidean norm of each data-feature column of the first layer. Encoding
/// columns are excluded.
pub fn first_layer_norms(params: &NetworkParams, cfg: &NetworkConfig) -> Vec<f64> {
    let d = cfg.input_dim.min(params.w1.cols());
    (0..d)
        .map(|j| {
            (0..params.w1.rows())
                .map(|m| params.w1[(m, j)].powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Group penalty `λ Σ_j ‖w_j‖₂` over the data-feature columns of the first
/// layer, and its subgradient (zero for an all-zero column).
pub fn group_penalty(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    lambda_group: f64,
) -> (f64, NetworkGradients) {
    let mut grad = NetworkGradients::zeros_with_input(
        params.w1.cols(),
        params.w1.rows(),
        params.w2.rows(),
    );
    if lambda_group == 0.0 {
        return (0.0, grad);
    }
    let norms = first_layer_norms(params, cfg);
    for (j, &norm) in norms.iter().enumerate() {
        if norm > 0.0 {
            for m in 0..params.w1.rows() {
                grad.w1[(m, j)] = lambda_group * params.w1[(m, j)] / norm;
            }
        }
    }
    (lambda_group * norms.iter().sum::<f64>(), grad)
}
