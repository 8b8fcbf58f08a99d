//! Hand-written backpropagation for the encoder classifier.

use ndarray::{s, Array2, Axis};

use super::forward::{gelu_grad, softmax, BlockCache, NormCache};
use super::{Model, ModelWeights};

/// Gradient accumulator shaped exactly like the weights.
pub(crate) type Gradients = ModelWeights;

fn add_row_sums(target: &mut Array2<f64>, rows: &Array2<f64>) {
    let sums = rows.sum_axis(Axis(0));
    target.row_mut(0).zip_mut_with(&sums, |t, s| *t += s);
}

/// Returns the gradient with respect to the norm input and accumulates the
/// gain and bias gradients.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    gain: &Array2<f64>,
    dgain: &mut Array2<f64>,
    dbias: &mut Array2<f64>,
) -> Array2<f64> {
    add_row_sums(dgain, &(dy * &cache.xhat));
    add_row_sums(dbias, dy);
    let dxhat = dy * gain;
    let d = dy.ncols() as f64;
    let mut dx = Array2::zeros(dy.raw_dim());
    for (i, mut row) in dx.rows_mut().into_iter().enumerate() {
        let g = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        for j in 0..row.len() {
            row[j] = cache.rstd[i] * (g[j] - mean_g - xh[j] * mean_gx);
        }
    }
    dx
}

impl Model {
    fn block_backward(
        &self,
        layer: usize,
        dout: &Array2<f64>,
        cache: &BlockCache,
        grads: &mut Gradients,
    ) -> Array2<f64> {
        let w = &self.weights.layers[layer];
        let g = &mut grads.layers[layer];
        let hd = self.config.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();

        // Feed-forward sublayer.
        g.ff_out += &cache.ff_act.t().dot(dout);
        add_row_sums(&mut g.ff_out_bias, dout);
        let dpre = dout.dot(&w.ff_out.t()) * cache.ff_pre.mapv(gelu_grad);
        g.ff_in += &cache.ff_norm.out.t().dot(&dpre);
        add_row_sums(&mut g.ff_in_bias, &dpre);
        let dnorm = dpre.dot(&w.ff_in.t());
        let mut dx1 = dout.clone();
        dx1 += &layer_norm_backward(
            &dnorm,
            &cache.ff_norm,
            &w.ff_norm_gain,
            &mut g.ff_norm_gain,
            &mut g.ff_norm_bias,
        );

        // Attention sublayer.
        g.output += &cache.context.t().dot(&dx1);
        add_row_sums(&mut g.output_bias, &dx1);
        let dcontext = dx1.dot(&w.output.t());
        let mut dq = Array2::zeros(cache.q.raw_dim());
        let mut dk = Array2::zeros(cache.k.raw_dim());
        let mut dv = Array2::zeros(cache.v.raw_dim());
        for (h, probs) in cache.probs.iter().enumerate() {
            let cols = s![.., h * hd..(h + 1) * hd];
            let dctx = dcontext.slice(cols);
            let dprobs = dctx.dot(&cache.v.slice(cols).t());
            dv.slice_mut(cols).assign(&probs.t().dot(&dctx));
            let mut dscores = probs * &dprobs;
            let row_dots = dscores.sum_axis(Axis(1));
            for (i, mut row) in dscores.rows_mut().into_iter().enumerate() {
                let p = probs.row(i);
                for j in 0..row.len() {
                    row[j] -= p[j] * row_dots[i];
                }
            }
            dscores *= scale;
            dq.slice_mut(cols).assign(&dscores.dot(&cache.k.slice(cols)));
            dk.slice_mut(cols).assign(&dscores.t().dot(&cache.q.slice(cols)));
        }
        let a = &cache.attn_norm.out;
        g.query += &a.t().dot(&dq);
        add_row_sums(&mut g.query_bias, &dq);
        g.key += &a.t().dot(&dk);
        add_row_sums(&mut g.key_bias, &dk);
        g.value += &a.t().dot(&dv);
        add_row_sums(&mut g.value_bias, &dv);
        let da = dq.dot(&w.query.t()) + dk.dot(&w.key.t()) + dv.dot(&w.value.t());
        let mut dx = dx1;
        dx += &layer_norm_backward(
            &da,
            &cache.attn_norm,
            &w.attn_norm_gain,
            &mut g.attn_norm_gain,
            &mut g.attn_norm_bias,
        );
        dx
    }

    /// Cross-entropy of one example; its gradient, scaled by `weight`, is
    /// added into `grads`. Returns the unscaled loss and the predicted class.
    pub(crate) fn accumulate_gradient(
        &self,
        ids: &[usize],
        label: usize,
        weight: f64,
        grads: &mut Gradients,
    ) -> crate::Result<(f64, usize)> {
        let embedding = self.embed(ids)?;
        let (trace, caches) = self.run_from_embeddings(embedding);
        let probs = softmax(&trace.logits);
        let loss = -probs[label].ln();
        let predicted = if probs[1] > probs[0] { 1 } else { 0 };

        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, p)| weight * (p - if c == label { 1.0 } else { 0.0 }))
            .collect();
        let last = trace.hidden.last().expect("at least one layer");
        let cls = last.row(0);
        let d = self.config.d_model;
        let mut dx = Array2::zeros((ids.len(), d));
        for (c, &dl) in dlogits.iter().enumerate() {
            grads.classifier_bias[[0, c]] += dl;
            for j in 0..d {
                grads.classifier[[j, c]] += cls[j] * dl;
                dx[[0, j]] += self.weights.classifier[[j, c]] * dl;
            }
        }
        for layer in (0..self.config.n_layers).rev() {
            dx = self.block_backward(layer, &dx, &caches[layer], grads);
        }
        for (pos, &id) in ids.iter().enumerate() {
            let row = dx.row(pos);
            grads.token_embeddings.row_mut(id).zip_mut_with(&row, |g, d| *g += d);
            grads
                .position_embeddings
                .row_mut(pos)
                .zip_mut_with(&row, |g, d| *g += d);
        }
        Ok((loss, predicted))
    }
}
