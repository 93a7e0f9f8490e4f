use super::{encode_position, Activation, NetworkConfig, NetworkGradients, NetworkParams, OutputRange};
use crate::error::{dims, NimoError, Result};
use crate::numerics::{dot, DenseMatrix, SeededRng};

#[inline]
fn hidden1_act(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Standard => a.tanh(),
        Activation::Linear => a,
    }
}

#[inline]
fn hidden1_grad(act: Activation, h: f64) -> f64 {
    match act {
        Activation::Standard => 1.0 - h * h,
        Activation::Linear => 1.0,
    }
}

/// Returns `(sin a, cos a)` or the identity pair.
#[inline]
fn hidden2_act(act: Activation, a: f64) -> (f64, f64) {
    match act {
        Activation::Standard => a.sin_cos(),
        Activation::Linear => (a, 1.0),
    }
}

/// Output squash and its derivative.
#[inline]
fn squash(act: Activation, range: OutputRange, o: f64) -> (f64, f64) {
    match act {
        Activation::Linear => (o, 1.0),
        Activation::Standard => {
            let t = o.tanh();
            match range {
                OutputRange::Regression => (t, 1.0 - t * t),
                OutputRange::Classification => (1.0 + 2.0 * t, 2.0 * (1.0 - t * t)),
            }
        }
    }
}

/// Intermediate values of one query, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTrace {
    /// First-layer pre-activation of the masked input, noise included.
    pub pre1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub output: f64,
    pub squashed: f64,
    /// Squashed output at the zero input for the same position and noise.
    pub baseline: f64,
}

/// Evaluates the correction for feature `j` at point `x`.
///
/// In train mode with positive noise scale, `hidden1` standard normal draws
/// are taken from `rng`. The same draws perturb the zero-input evaluation, so
/// the result is exactly zero whenever `x` is zero off position `j`.
pub fn forward_one(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    x: &[f64],
    j: usize,
    rng: &mut SeededRng,
) -> Result<(f64, QueryTrace)> {
    cfg.validate()?;
    params.validate(cfg)?;
    let d = cfg.input_dim;
    if x.len() != d {
        return Err(dims(d, x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NimoError::NonFinite("network input"));
    }
    let enc = encode_position(j, d)?;
    let mut input: Vec<f64> = x.to_vec();
    input[j] = 0.0;
    input.extend_from_slice(&enc);
    let mut zero_input = vec![0.0; d];
    zero_input.extend_from_slice(&enc);

    let noise: Vec<f64> = if cfg.noisy() {
        (0..cfg.hidden1).map(|_| cfg.noise_scale * rng.normal()).collect()
    } else {
        vec![0.0; cfg.hidden1]
    };

    let eval = |u: &[f64]| {
        let pre1: Vec<f64> = (0..cfg.hidden1)
            .map(|m| dot(params.w1.row(m), u) + params.b1[m] + noise[m])
            .collect();
        let h1: Vec<f64> = pre1.iter().map(|&a| hidden1_act(cfg.activation, a)).collect();
        let pre2: Vec<f64> = (0..cfg.hidden2)
            .map(|k| dot(params.w2.row(k), &h1) + params.b2[k])
            .collect();
        let h2: Vec<f64> = pre2.iter().map(|&a| hidden2_act(cfg.activation, a).0).collect();
        let o = dot(&params.w3, &h2) + params.b3;
        let (s, _) = squash(cfg.activation, cfg.output_range, o);
        (pre1, pre2, o, s)
    };
    let (pre1, pre2, output, squashed) = eval(&input);
    let (_, _, _, baseline) = eval(&zero_input);
    let g = squashed - baseline;
    if !g.is_finite() {
        return Err(NimoError::NonFinite("network output"));
    }
    Ok((
        g,
        QueryTrace {
            pre1,
            pre2,
            output,
            squashed,
            baseline,
        },
    ))
}

/// Activations of one evaluation path, stored per query.
#[derive(Debug, Clone, Default)]
struct PathCache {
    h1: Vec<f64>,
    h2: Vec<f64>,
    c2: Vec<f64>,
    ds: Vec<f64>,
}

impl PathCache {
    fn with_capacity(queries: usize, hidden1: usize, hidden2: usize) -> Self {
        Self {
            h1: Vec::with_capacity(queries * hidden1),
            h2: Vec::with_capacity(queries * hidden2),
            c2: Vec::with_capacity(queries * hidden2),
            ds: Vec::with_capacity(queries),
        }
    }
}

/// Activation record of a [`forward_matrix`] call, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    n: usize,
    d: usize,
    hidden1: usize,
    hidden2: usize,
    activation: Activation,
    noisy: bool,
    x: DenseMatrix,
    enc: Vec<Vec<f64>>,
    data: PathCache,
    /// Per query when noisy, otherwise one entry per position.
    baseline: PathCache,
}

impl ForwardCache {
    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.d)
    }
}

struct Workspace {
    pre1: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    c2: Vec<f64>,
}

impl Workspace {
    fn new(hidden1: usize, hidden2: usize) -> Self {
        Self {
            pre1: vec![0.0; hidden1],
            h1: vec![0.0; hidden1],
            h2: vec![0.0; hidden2],
            c2: vec![0.0; hidden2],
        }
    }
}

/// Runs layers two and three from a first-layer pre-activation held in
/// `ws.pre1`; returns the squashed output and its derivative.
#[inline]
fn finish_path(params: &NetworkParams, cfg: &NetworkConfig, ws: &mut Workspace) -> (f64, f64) {
    for (h, &a) in ws.h1.iter_mut().zip(&ws.pre1) {
        *h = hidden1_act(cfg.activation, a);
    }
    let mut o = params.b3;
    for k in 0..cfg.hidden2 {
        let a = dot(params.w2.row(k), &ws.h1) + params.b2[k];
        let (s, c) = hidden2_act(cfg.activation, a);
        ws.h2[k] = s;
        ws.c2[k] = c;
        o += params.w3[k] * s;
    }
    squash(cfg.activation, cfg.output_range, o)
}

fn store(cache: &mut PathCache, ws: &Workspace, ds: f64) {
    cache.h1.extend_from_slice(&ws.h1);
    cache.h2.extend_from_slice(&ws.h2);
    cache.c2.extend_from_slice(&ws.c2);
    cache.ds.push(ds);
}

fn forward_impl(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    x: &DenseMatrix,
    rng: &mut SeededRng,
    keep_cache: bool,
) -> Result<(DenseMatrix, Option<ForwardCache>)> {
    cfg.validate()?;
    params.validate(cfg)?;
    let d = cfg.input_dim;
    if x.cols() != d {
        return Err(dims(format!("{d} columns"), x.cols()));
    }
    if !x.is_finite() {
        return Err(NimoError::NonFinite("network input"));
    }
    let n = x.rows();
    let (p, q) = (cfg.hidden1, cfg.hidden2);
    let noisy = cfg.noisy();

    let enc: Vec<Vec<f64>> = (0..d).map(|j| encode_position(j, d)).collect::<Result<_>>()?;
    // Encoding contribution plus bias per position, and data columns of w1.
    let mut enc_bias = vec![0.0; d * p];
    let mut w1_cols = vec![0.0; d * p];
    for m in 0..p {
        let row = params.w1.row(m);
        for j in 0..d {
            enc_bias[j * p + m] = params.b1[m] + dot(&row[d..], &enc[j]);
            w1_cols[j * p + m] = row[j];
        }
    }

    let mut ws = Workspace::new(p, q);
    let queries = n * d;
    let mut data = if keep_cache {
        PathCache::with_capacity(queries, p, q)
    } else {
        PathCache::default()
    };
    let mut baseline = if keep_cache {
        PathCache::with_capacity(if noisy { queries } else { d }, p, q)
    } else {
        PathCache::default()
    };

    let mut base_out = vec![0.0; d];
    if !noisy {
        for j in 0..d {
            ws.pre1.copy_from_slice(&enc_bias[j * p..(j + 1) * p]);
            let (s0, ds0) = finish_path(params, cfg, &mut ws);
            base_out[j] = s0;
            if keep_cache {
                store(&mut baseline, &ws, ds0);
            }
        }
    }

    let mut g = DenseMatrix::zeros(n, d);
    let mut row_base = vec![0.0; p];
    let mut noise = vec![0.0; p];
    for i in 0..n {
        let xi = x.row(i);
        for (m, rb) in row_base.iter_mut().enumerate() {
            *rb = dot(&params.w1.row(m)[..d], xi);
        }
        for j in 0..d {
            let xij = xi[j];
            let eb = &enc_bias[j * p..(j + 1) * p];
            let wc = &w1_cols[j * p..(j + 1) * p];
            if noisy {
                for v in noise.iter_mut() {
                    *v = cfg.noise_scale * rng.normal();
                }
            }
            for m in 0..p {
                ws.pre1[m] = row_base[m] - wc[m] * xij + eb[m] + noise[m];
            }
            let (s, ds) = finish_path(params, cfg, &mut ws);
            if keep_cache {
                store(&mut data, &ws, ds);
            }
            let s0 = if noisy {
                for m in 0..p {
                    ws.pre1[m] = eb[m] + noise[m];
                }
                let (s0, ds0) = finish_path(params, cfg, &mut ws);
                if keep_cache {
                    store(&mut baseline, &ws, ds0);
                }
                s0
            } else {
                base_out[j]
            };
            g[(i, j)] = s - s0;
        }
    }
    if !g.is_finite() {
        return Err(NimoError::NonFinite("network output"));
    }
    let cache = keep_cache.then(|| ForwardCache {
        n,
        d,
        hidden1: p,
        hidden2: q,
        activation: cfg.activation,
        noisy,
        x: x.clone(),
        enc,
        data,
        baseline,
    });
    Ok((g, cache))
}

/// Evaluates the correction matrix `G[i][j] = g(X_i, j)` and keeps the
/// activations needed by [`backward`].
pub fn forward_matrix(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    x: &DenseMatrix,
    rng: &mut SeededRng,
) -> Result<(DenseMatrix, ForwardCache)> {
    let (g, cache) = forward_impl(params, cfg, x, rng, true)?;
    Ok((g, cache.expect("cache requested")))
}

/// Like [`forward_matrix`] without retaining activations.
pub fn forward_values(
    params: &NetworkParams,
    cfg: &NetworkConfig,
    x: &DenseMatrix,
    rng: &mut SeededRng,
) -> Result<DenseMatrix> {
    Ok(forward_impl(params, cfg, x, rng, false)?.0)
}

struct BackpropScratch {
    da1: Vec<f64>,
    da2: Vec<f64>,
}

/// Accumulates output-layer and second-layer gradients for one stored query
/// and writes the first-layer pre-activation gradient into `scratch.da1`.
#[inline]
fn backprop_path(
    params: &NetworkParams,
    cache: &ForwardCache,
    path: &PathCache,
    idx: usize,
    delta: f64,
    grads: &mut NetworkGradients,
    scratch: &mut BackpropScratch,
) {
    let (p, q) = (cache.hidden1, cache.hidden2);
    let h1 = &path.h1[idx * p..(idx + 1) * p];
    let h2 = &path.h2[idx * q..(idx + 1) * q];
    let c2 = &path.c2[idx * q..(idx + 1) * q];
    let go = delta * path.ds[idx];
    grads.b3 += go;
    for k in 0..q {
        grads.w3[k] += go * h2[k];
        scratch.da2[k] = go * params.w3[k] * c2[k];
    }
    scratch.da1.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..q {
        let a = scratch.da2[k];
        if a == 0.0 {
            continue;
        }
        grads.b2[k] += a;
        let gw = grads.w2.row_mut(k);
        let w = params.w2.row(k);
        for m in 0..p {
            gw[m] += a * h1[m];
            scratch.da1[m] += a * w[m];
        }
    }
    for m in 0..p {
        scratch.da1[m] *= hidden1_grad(cache.activation, h1[m]);
    }
}

/// Reverse-mode gradients of `Σ upstream[i][j] · G[i][j]` with respect to all
/// network parameters, including the path through the subtracted baseline.
pub fn backward(
    params: &NetworkParams,
    cache: &ForwardCache,
    upstream: &DenseMatrix,
) -> Result<NetworkGradients> {
    if upstream.shape() != (cache.n, cache.d)
        || params.w1.rows() != cache.hidden1
        || params.w3.len() != cache.hidden2
    {
        return Err(NimoError::StaleCache);
    }
    let (n, d, p) = (cache.n, cache.d, cache.hidden1);
    let mut grads = NetworkGradients::zeros_with_input(params.w1.cols(), p, cache.hidden2);
    let mut scratch = BackpropScratch {
        da1: vec![0.0; p],
        da2: vec![0.0; cache.hidden2],
    };
    // First-layer gradient summed per position (both paths see its encoding).
    let mut per_pos = vec![0.0; d * p];
    let mut baseline_delta = vec![0.0; d];
    let mut row_sum = vec![0.0; p];
    let width = params.w1.cols();

    for i in 0..n {
        let xi = cache.x.row(i);
        row_sum.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d {
            let delta = upstream[(i, j)];
            if delta == 0.0 {
                continue;
            }
            let qidx = i * d + j;
            backprop_path(params, cache, &cache.data, qidx, delta, &mut grads, &mut scratch);
            let pos = &mut per_pos[j * p..(j + 1) * p];
            let gw1 = grads.w1.as_mut_slice();
            for m in 0..p {
                let a = scratch.da1[m];
                row_sum[m] += a;
                pos[m] += a;
                // The masked entry contributes nothing.
                gw1[m * width + j] -= a * xi[j];
            }
            if cache.noisy {
                backprop_path(params, cache, &cache.baseline, qidx, -delta, &mut grads, &mut scratch);
                let pos = &mut per_pos[j * p..(j + 1) * p];
                for m in 0..p {
                    pos[m] += scratch.da1[m];
                }
            } else {
                baseline_delta[j] -= delta;
            }
        }
        let gw1 = grads.w1.as_mut_slice();
        for m in 0..p {
            let s = row_sum[m];
            if s == 0.0 {
                continue;
            }
            let row = &mut gw1[m * width..m * width + d];
            for (g, &xk) in row.iter_mut().zip(xi) {
                *g += s * xk;
            }
        }
    }
    if !cache.noisy {
        for j in 0..d {
            if baseline_delta[j] == 0.0 {
                continue;
            }
            backprop_path(params, cache, &cache.baseline, j, baseline_delta[j], &mut grads, &mut scratch);
            let pos = &mut per_pos[j * p..(j + 1) * p];
            for m in 0..p {
                pos[m] += scratch.da1[m];
            }
        }
    }
    for j in 0..d {
        let pos = &per_pos[j * p..(j + 1) * p];
        for m in 0..p {
            grads.b1[m] += pos[m];
            for (b, &bit) in cache.enc[j].iter().enumerate() {
                if bit != 0.0 {
                    grads.w1[(m, d + b)] += pos[m] * bit;
                }
            }
        }
    }
    Ok(grads)
}
