//! Graph-convolution + LSTM encoder with two linear heads (recent demand and
//! historical average) whose sum parameterizes the demand distribution.

use std::collections::BTreeMap;

use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{sigmoid, DistFamily, Theta};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: DistFamily,
    /// Number of past intervals fed to the encoder.
    pub lag: usize,
    pub hidden: usize,
    pub gcn_layers: usize,
    /// Forecast horizon in intervals.
    pub horizon: usize,
    /// Demand counts are divided by this before entering the network.
    pub input_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { family: DistFamily::Poisson, lag: 12, hidden: 32, gcn_layers: 2, horizon: 6, input_scale: 10.0 }
    }
}

/// `ReLU(a_hat · h · w)`.
pub fn gcn_forward(h: &Array2<f64>, a_hat: &Array2<f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
    if a_hat.nrows() != a_hat.ncols() || a_hat.ncols() != h.nrows() || h.ncols() != w.nrows() {
        return Err(Error::shape(format!(
            "gcn: a_hat {:?}, h {:?}, w {:?}",
            a_hat.dim(),
            h.dim(),
            w.dim()
        )));
    }
    Ok(a_hat.dot(h).dot(w).mapv(|v| v.max(0.0)))
}

/// Weights of one LSTM cell; the four gate blocks are laid out as
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub wx: Array2<f64>,
    pub wh: Array2<f64>,
    pub b: Array2<f64>,
}

impl LstmWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmWeights {
            wx: Array2::zeros((input, 4 * hidden)),
            wh: Array2::zeros((hidden, 4 * hidden)),
            b: Array2::zeros((1, 4 * hidden)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }
}

/// One LSTM step for a batch of rows: sigmoid input/forget/output gates and
/// tanh candidate and output squashing.
pub fn lstm_step(
    x: &Array2<f64>,
    h: &Array2<f64>,
    c: &Array2<f64>,
    w: &LstmWeights,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let hid = w.hidden();
    if w.wx.ncols() != 4 * hid
        || w.b.dim() != (1, 4 * hid)
        || x.ncols() != w.wx.nrows()
        || h.ncols() != hid
        || c.dim() != h.dim()
        || x.nrows() != h.nrows()
    {
        return Err(Error::shape(format!(
            "lstm: x {:?}, h {:?}, c {:?}, wx {:?}, wh {:?}",
            x.dim(),
            h.dim(),
            c.dim(),
            w.wx.dim(),
            w.wh.dim()
        )));
    }
    let z = x.dot(&w.wx) + h.dot(&w.wh) + &w.b;
    let i = z.slice(s![.., 0..hid]).mapv(sigmoid);
    let f = z.slice(s![.., hid..2 * hid]).mapv(sigmoid);
    let g = z.slice(s![.., 2 * hid..3 * hid]).mapv(f64::tanh);
    let o = z.slice(s![.., 3 * hid..4 * hid]).mapv(sigmoid);
    let c_next = &f * c + &i * &g;
    let h_next = &o * &c_next.mapv(f64::tanh);
    Ok((h_next, c_next))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub gcn: Vec<Array2<f64>>,
    pub lstm: LstmWeights,
    pub recent_w: Array2<f64>,
    pub recent_b: Array2<f64>,
    pub hist_w: Array2<f64>,
    pub hist_b: Array2<f64>,
}

impl ModelWeights {
    fn zeros(cfg: &ModelConfig) -> Self {
        let out = cfg.horizon * cfg.family.arity();
        let gcn = (0..cfg.gcn_layers)
            .map(|l| Array2::zeros((if l == 0 { 1 } else { cfg.hidden }, cfg.hidden)))
            .collect();
        let lstm_in = if cfg.gcn_layers == 0 { 1 } else { cfg.hidden };
        ModelWeights {
            gcn,
            lstm: LstmWeights::zeros(lstm_in, cfg.hidden),
            recent_w: Array2::zeros((cfg.hidden, out)),
            recent_b: Array2::zeros((1, out)),
            hist_w: Array2::zeros((cfg.horizon, out)),
            hist_b: Array2::zeros((1, out)),
        }
    }

    /// Tensors in a fixed order with their serialized names.
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> =
            self.gcn.iter().enumerate().map(|(l, w)| (format!("gcn.{l}.weight"), w)).collect();
        out.push(("lstm.wx".into(), &self.lstm.wx));
        out.push(("lstm.wh".into(), &self.lstm.wh));
        out.push(("lstm.bias".into(), &self.lstm.b));
        out.push(("recent.weight".into(), &self.recent_w));
        out.push(("recent.bias".into(), &self.recent_b));
        out.push(("hist.weight".into(), &self.hist_w));
        out.push(("hist.bias".into(), &self.hist_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = self.gcn.iter_mut().collect();
        out.push(&mut self.lstm.wx);
        out.push(&mut self.lstm.wh);
        out.push(&mut self.lstm.b);
        out.push(&mut self.recent_w);
        out.push(&mut self.recent_b);
        out.push(&mut self.hist_w);
        out.push(&mut self.hist_b);
        out
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        self.named().into_iter().map(|(_, t)| t).collect()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ModelWeights) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|v| v * alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Flat read access in [`Self::named`] order.
    pub fn get_flat(&self, mut idx: usize) -> f64 {
        for t in self.tensors() {
            if idx < t.len() {
                return t.as_slice().expect("standard layout")[idx];
            }
            idx -= t.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_flat(&mut self, mut idx: usize, value: f64) {
        for t in self.tensors_mut() {
            if idx < t.len() {
                t.as_slice_mut().expect("standard layout")[idx] = value;
                return;
            }
            idx -= t.len();
        }
        panic!("parameter index out of range")
    }
}

/// Per-(region, horizon step) distribution parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistForecast {
    pub family: DistFamily,
    pub regions: usize,
    pub horizon: usize,
    theta: Vec<Theta>,
}

impl DistForecast {
    pub fn new(family: DistFamily, regions: usize, horizon: usize, theta: Vec<Theta>) -> Result<Self> {
        if theta.len() != regions * horizon {
            return Err(Error::shape(format!("{} parameter cells for {regions} x {horizon}", theta.len())));
        }
        for t in &theta {
            family.validate(t)?;
        }
        Ok(DistForecast { family, regions, horizon, theta })
    }

    /// A forecast of the same family at every cell.
    pub fn uniform(family: DistFamily, regions: usize, horizon: usize, theta: Theta) -> Result<Self> {
        DistForecast::new(family, regions, horizon, vec![theta; regions * horizon])
    }

    pub fn theta(&self, region: usize, step: usize) -> &Theta {
        &self.theta[region * self.horizon + step]
    }

    pub fn mean(&self, region: usize, step: usize) -> f64 {
        self.family.mean(self.theta(region, step))
    }

    /// Point forecast matrix, regions x horizon.
    pub fn means(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.regions, self.horizon), |(i, k)| self.mean(i, k))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastModel {
    pub config: ModelConfig,
    /// Normalized adjacency of the zone graph.
    pub a_hat: Array2<f64>,
    pub weights: ModelWeights,
}

/// Intermediate values of one forward pass kept for backpropagation.
struct Tape {
    /// Per lag: per GCN layer, `(a_hat · input, pre-activation)`.
    gcn: Vec<Vec<(Array2<f64>, Array2<f64>)>>,
    /// Per lag: encoder output fed to the LSTM.
    enc: Vec<Array2<f64>>,
    /// Per lag: `(i, f, g, o, c, h)`; index 0 is the first lag.
    lstm: Vec<[Array2<f64>; 6]>,
    hist: Array2<f64>,
    raw: Array2<f64>,
}

impl ForecastModel {
    /// Random weights drawn from a seeded uniform Glorot range; biases and
    /// the historical head start at zero.
    pub fn new(config: ModelConfig, a_hat: Array2<f64>, seed: u64) -> Result<Self> {
        if a_hat.nrows() != a_hat.ncols() {
            return Err(Error::shape("normalized adjacency must be square"));
        }
        if config.lag == 0 || config.hidden == 0 || config.horizon == 0 || !(config.input_scale > 0.0) {
            return Err(Error::invariant("lag, hidden, horizon and input scale must be positive"));
        }
        let mut weights = ModelWeights::zeros(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |t: &mut Array2<f64>| {
            let bound = (6.0 / (t.nrows() + t.ncols()) as f64).sqrt();
            t.mapv_inplace(|_| rng.random_range(-bound..bound));
        };
        for w in &mut weights.gcn {
            glorot(w);
        }
        glorot(&mut weights.lstm.wx);
        glorot(&mut weights.lstm.wh);
        glorot(&mut weights.recent_w);
        weights.recent_w.mapv_inplace(|v| 0.1 * v);
        // Forget-gate bias of one.
        let hid = config.hidden;
        weights.lstm.b.slice_mut(s![.., hid..2 * hid]).fill(1.0);
        Ok(ForecastModel { config, a_hat, weights })
    }

    /// Points the historical head at the family's mean parameter so that an
    /// untrained model forecasts the historical average, and sets the scale
    /// biases from `spread` (a typical standard deviation).
    pub fn warm_start(&mut self, spread: f64) {
        let fam = self.config.family;
        let arity = fam.arity();
        let mean_slot = match fam {
            DistFamily::ZeroInflatedPoisson => 1,
            _ => 0,
        };
        for h in 0..self.config.horizon {
            self.weights.hist_w[[h, h * arity + mean_slot]] = self.config.input_scale;
            let bias = fam.unlink(match fam {
                DistFamily::Normal | DistFamily::TruncatedNormal => [0.0, spread.max(0.5)],
                DistFamily::Poisson => [1e-3, 0.0],
                DistFamily::ZeroInflatedPoisson => [0.02, 1e-3],
                DistFamily::NegativeBinomial => [1e-3, 20.0],
            });
            for p in 0..arity {
                self.weights.hist_b[[0, h * arity + p]] = if p == mean_slot { 0.0 } else { bias[p] };
            }
        }
    }

    pub fn regions(&self) -> usize {
        self.a_hat.nrows()
    }

    fn check_inputs(&self, lags: &Array2<f64>, hist: &Array2<f64>) -> Result<()> {
        let n = self.regions();
        if lags.nrows() != n || hist.nrows() != n {
            return Err(Error::shape(format!("inputs have {} / {} rows for {n} zones", lags.nrows(), hist.nrows())));
        }
        if lags.ncols() != self.config.lag || lags.iter().any(|v| !v.is_finite()) {
            return Err(Error::InsufficientData(format!(
                "lag window needs {} filled intervals, got {}",
                self.config.lag,
                lags.ncols()
            )));
        }
        if hist.ncols() != self.config.horizon {
            return Err(Error::shape(format!("historical features need {} columns", self.config.horizon)));
        }
        Ok(())
    }

    fn run(&self, lags: &Array2<f64>, hist: &Array2<f64>) -> Result<Tape> {
        self.check_inputs(lags, hist)?;
        let n = self.regions();
        let hid = self.config.hidden;
        let scale = self.config.input_scale;
        let w = &self.weights;
        let mut tape = Tape {
            gcn: Vec::with_capacity(self.config.lag),
            enc: Vec::with_capacity(self.config.lag),
            lstm: Vec::with_capacity(self.config.lag),
            hist: hist.mapv(|v| v / scale),
            raw: Array2::zeros((0, 0)),
        };
        let mut h = Array2::<f64>::zeros((n, hid));
        let mut c = Array2::<f64>::zeros((n, hid));
        for t in 0..self.config.lag {
            let mut x = lags.slice(s![.., t..t + 1]).mapv(|v| v / scale);
            let mut layers = Vec::with_capacity(w.gcn.len());
            for wl in &w.gcn {
                let ax = self.a_hat.dot(&x);
                let z = ax.dot(wl);
                x = z.mapv(|v| v.max(0.0));
                layers.push((ax, z));
            }
            tape.gcn.push(layers);
            let z = x.dot(&w.lstm.wx) + h.dot(&w.lstm.wh) + &w.lstm.b;
            let gi = z.slice(s![.., 0..hid]).mapv(sigmoid);
            let gf = z.slice(s![.., hid..2 * hid]).mapv(sigmoid);
            let gg = z.slice(s![.., 2 * hid..3 * hid]).mapv(f64::tanh);
            let go = z.slice(s![.., 3 * hid..4 * hid]).mapv(sigmoid);
            c = &gf * &c + &gi * &gg;
            h = &go * &c.mapv(f64::tanh);
            tape.enc.push(x);
            tape.lstm.push([gi, gf, gg, go, c.clone(), h.clone()]);
        }
        tape.raw = h.dot(&w.recent_w) + &w.recent_b + tape.hist.dot(&w.hist_w) + &w.hist_b;
        Ok(tape)
    }

    /// Unconstrained head outputs, regions x (horizon * arity).
    pub fn raw_outputs(&self, lags: &Array2<f64>, hist: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.run(lags, hist)?.raw)
    }

    /// Distribution parameters for the next `horizon` intervals given the
    /// last `lag` observed counts (oldest first) and the historical averages
    /// of the target intervals.
    pub fn forward(&self, lags: &Array2<f64>, hist: &Array2<f64>) -> Result<DistForecast> {
        let raw = self.raw_outputs(lags, hist)?;
        let fam = self.config.family;
        let a = fam.arity();
        let mut theta = Vec::with_capacity(raw.nrows() * self.config.horizon);
        for i in 0..raw.nrows() {
            for h in 0..self.config.horizon {
                let mut r = [0.0; 2];
                for p in 0..a {
                    r[p] = raw[[i, h * a + p]];
                }
                theta.push(fam.link(&r));
            }
        }
        DistForecast::new(fam, raw.nrows(), self.config.horizon, theta)
    }

    /// Summed NLL of `target` (regions x horizon) and its gradient.
    pub fn loss_and_grad(
        &self,
        lags: &Array2<f64>,
        hist: &Array2<f64>,
        target: &Array2<f64>,
    ) -> Result<(f64, ModelWeights)> {
        let tape = self.run(lags, hist)?;
        let fam = self.config.family;
        let a = fam.arity();
        let n = self.regions();
        let hid = self.config.hidden;
        if target.dim() != (n, self.config.horizon) {
            return Err(Error::shape(format!("target is {:?}", target.dim())));
        }
        let w = &self.weights;
        let mut grad = w.zeros_like();

        let mut loss = 0.0;
        let mut draw = Array2::<f64>::zeros(tape.raw.dim());
        for i in 0..n {
            for h in 0..self.config.horizon {
                let mut r = [0.0; 2];
                for p in 0..a {
                    r[p] = tape.raw[[i, h * a + p]];
                }
                let (v, g) = fam.nll_raw(&r, target[[i, h]])?;
                loss += v;
                for p in 0..a {
                    draw[[i, h * a + p]] = g[p];
                }
            }
        }

        let last = tape.lstm.last().expect("lag >= 1");
        grad.recent_w = last[5].t().dot(&draw);
        grad.recent_b = draw.sum_axis(Axis(0)).insert_axis(Axis(0));
        grad.hist_w = tape.hist.t().dot(&draw);
        grad.hist_b = grad.recent_b.clone();

        let mut dh = draw.dot(&w.recent_w.t());
        let mut dc = Array2::<f64>::zeros((n, hid));
        let zeros = Array2::<f64>::zeros((n, hid));
        for t in (0..self.config.lag).rev() {
            let [gi, gf, gg, go, c, _] = &tape.lstm[t];
            let (c_prev, h_prev) = if t == 0 { (&zeros, &zeros) } else { (&tape.lstm[t - 1][4], &tape.lstm[t - 1][5]) };
            let tc = c.mapv(f64::tanh);
            dc = dc + &dh * go * &tc.mapv(|v| 1.0 - v * v);
            let d_o = &dh * &tc;
            let d_i = &dc * gg;
            let d_g = &dc * gi;
            let d_f = &dc * c_prev;
            let mut dz = Array2::<f64>::zeros((n, 4 * hid));
            dz.slice_mut(s![.., 0..hid]).assign(&(&d_i * &gi.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![.., hid..2 * hid]).assign(&(&d_f * &gf.mapv(|v| v * (1.0 - v))));
            dz.slice_mut(s![.., 2 * hid..3 * hid]).assign(&(&d_g * &gg.mapv(|v| 1.0 - v * v)));
            dz.slice_mut(s![.., 3 * hid..4 * hid]).assign(&(&d_o * &go.mapv(|v| v * (1.0 - v))));

            grad.lstm.wx += &tape.enc[t].t().dot(&dz);
            grad.lstm.wh += &h_prev.t().dot(&dz);
            grad.lstm.b += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));

            let mut dx = dz.dot(&w.lstm.wx.t());
            dh = dz.dot(&w.lstm.wh.t());
            dc = &dc * gf;

            for (l, (ax, z)) in tape.gcn[t].iter().enumerate().rev() {
                let dzl = &dx * &z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                grad.gcn[l] += &ax.t().dot(&dzl);
                if l > 0 {
                    dx = self.a_hat.t().dot(&dzl.dot(&w.gcn[l].t()));
                }
            }
        }
        Ok((loss, grad))
    }

    /// Weights keyed by layer name, each a row-major matrix.
    pub fn to_json(&self) -> Result<String> {
        let layers: BTreeMap<String, StoredMatrix> =
            self.weights.named().into_iter().map(|(k, t)| (k, StoredMatrix::from(t))).collect();
        let doc = StoredModel {
            config: self.config.clone(),
            a_hat: StoredMatrix::from(&self.a_hat),
            layers,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StoredModel = serde_json::from_str(text)?;
        let a_hat = doc.a_hat.into_array()?;
        let mut model = ForecastModel::new(doc.config, a_hat, 0)?;
        let names: Vec<String> = model.weights.named().into_iter().map(|(k, _)| k).collect();
        let mut layers = doc.layers;
        for (name, slot) in names.iter().zip(model.weights.tensors_mut()) {
            let stored = layers.remove(name).ok_or_else(|| Error::Format(format!("missing layer `{name}`")))?;
            let arr = stored.into_array()?;
            if arr.dim() != slot.dim() {
                return Err(Error::shape(format!("layer `{name}` is {:?}, expected {:?}", arr.dim(), slot.dim())));
            }
            *slot = arr;
        }
        if !model.weights.is_finite() {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&Array2<f64>> for StoredMatrix {
    fn from(a: &Array2<f64>) -> Self {
        StoredMatrix { rows: a.nrows(), cols: a.ncols(), data: a.iter().copied().collect() }
    }
}

impl StoredMatrix {
    fn into_array(self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::Format(format!("bad matrix: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    config: ModelConfig,
    a_hat: StoredMatrix,
    layers: BTreeMap<String, StoredMatrix>,
}
