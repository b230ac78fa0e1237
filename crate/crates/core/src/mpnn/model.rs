use ndarray::{s, Array1, Array2, Axis, Dimension, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{loss_on_output, Activation, Aggregation, ModelParams, MpnnError};
use crate::featurize::MolGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, masks drawn from this seed.
    Train {
        seed: u64,
    },
}

#[derive(Debug, Clone)]
struct StepTape {
    /// Message MLP pre-activations per directed edge.
    u: Array2<f64>,
    a: Array2<f64>,
    m: Array2<f64>,
    z: Array2<f64>,
    mask: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
struct FfnTape {
    input: Array1<f64>,
    /// Pre-activation; absent for the output layer.
    z: Option<Array1<f64>>,
    mask: Option<Array1<f64>>,
}

/// Intermediates of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct Tape<'g> {
    graph: &'g MolGraph,
    z0: Array2<f64>,
    /// Hidden states `h⁰ ..= h^T` after dropout.
    h: Vec<Array2<f64>>,
    steps: Vec<StepTape>,
    readout_in: Array2<f64>,
    readout_z: Array2<f64>,
    agg_scale: f64,
    ffn: Vec<FfnTape>,
    pub output: f64,
}

fn act2<D: Dimension>(
    z: &ndarray::Array<f64, D>,
    kind: Activation,
    alpha: f64,
) -> ndarray::Array<f64, D> {
    z.mapv(|v| kind.apply(v, alpha))
}

/// Upstream gradient through the activation; returns the pre-activation
/// gradient and the contribution to ∂/∂alpha.
fn act_back<D: Dimension>(
    z: &ndarray::Array<f64, D>,
    upstream: &ndarray::Array<f64, D>,
    kind: Activation,
    alpha: f64,
) -> (ndarray::Array<f64, D>, f64) {
    let mut dalpha = 0.0;
    let mut dz = upstream.clone();
    Zip::from(&mut dz).and(z).for_each(|g, &zv| {
        dalpha += *g * kind.alpha_derivative(zv);
        *g *= kind.derivative(zv, alpha);
    });
    (dz, dalpha)
}

fn dropout_mask<D: Dimension>(rng: &mut ChaCha8Rng, shape: D, rate: f64) -> ndarray::Array<f64, D> {
    let keep = 1.0 - rate;
    ndarray::Array::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

fn check_graph(model: &ModelParams, graph: &MolGraph) -> Result<(), MpnnError> {
    let mismatch = |what: &str, expected: usize, found: usize| MpnnError::DimensionMismatch {
        what: format!("{what} of `{}`", graph.id),
        expected,
        found,
    };
    if graph.node_width() != model.node_width {
        return Err(mismatch("node width", model.node_width, graph.node_width()));
    }
    if graph.edge_features.ncols() != model.edge_width {
        return Err(mismatch(
            "edge width",
            model.edge_width,
            graph.edge_features.ncols(),
        ));
    }
    if graph.edge_features.nrows() != graph.edges.len() {
        return Err(mismatch(
            "edge feature rows",
            graph.edges.len(),
            graph.edge_features.nrows(),
        ));
    }
    if graph.atom_count() == 0 {
        return Err(mismatch("atom count", 1, 0));
    }
    Ok(())
}

/// Scatter-add edge rows into their destination atoms.
fn sum_into_dst(edges: &[(usize, usize)], rows: &Array2<f64>, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, rows.ncols()));
    for (k, &(_, dst)) in edges.iter().enumerate() {
        let mut r = out.row_mut(dst);
        r += &rows.row(k);
    }
    out
}

pub fn forward<'g>(
    model: &ModelParams,
    graph: &'g MolGraph,
    mode: Mode,
) -> Result<Tape<'g>, MpnnError> {
    check_graph(model, graph)?;
    let cfg = &model.config;
    let (kind, alpha) = (cfg.activation, model.alpha());
    let mut rng = match mode {
        Mode::Train { seed } if cfg.dropout > 0.0 => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let n = graph.atom_count();
    let x = &graph.node_features;

    let z0 = x.dot(&model.input.w.t()) + &model.input.b;
    let mut h = vec![act2(&z0, kind, alpha)];
    let edge_term = graph.edge_features.dot(&model.msg_edge.w.t()) + &model.msg_edge.b;

    let mut steps = Vec::with_capacity(cfg.depth);
    for _ in 0..cfg.depth {
        let cur = h.last().expect("h⁰ present");
        let p = cur.dot(&model.msg_self.t());
        let q = cur.dot(&model.msg_nbr.t());
        let mut u = edge_term.clone();
        for (k, &(src, dst)) in graph.edges.iter().enumerate() {
            let mut row = u.row_mut(k);
            row += &p.row(dst);
            row += &q.row(src);
        }
        let a = act2(&u, kind, alpha);
        let msgs = a.dot(&model.msg_out.w.t()) + &model.msg_out.b;
        let m = sum_into_dst(&graph.edges, &msgs, n);
        let z = cur.dot(&model.upd_self.t()) + m.dot(&model.upd_msg.w.t()) + &model.upd_msg.b;
        let mut next = act2(&z, kind, alpha);
        let mask = rng
            .as_mut()
            .map(|r| dropout_mask(r, next.raw_dim(), cfg.dropout));
        if let Some(mask) = &mask {
            next *= mask;
        }
        steps.push(StepTape { u, a, m, z, mask });
        h.push(next);
    }

    let last = h.last().expect("h^T present");
    let mut nbr_sum = Array2::zeros((n, model.hidden()));
    for &(src, dst) in &graph.edges {
        let mut r = nbr_sum.row_mut(dst);
        r += &last.row(src);
    }
    let mut readout_in = Array2::zeros((n, model.node_width + model.hidden()));
    readout_in.slice_mut(s![.., ..model.node_width]).assign(x);
    readout_in
        .slice_mut(s![.., model.node_width..])
        .assign(&nbr_sum);
    let readout_z = readout_in.dot(&model.readout.w.t()) + &model.readout.b;
    let hf = act2(&readout_z, kind, alpha);

    let agg_scale = match cfg.aggregation {
        Aggregation::Sum => 1.0,
        Aggregation::Mean => 1.0 / n as f64,
        Aggregation::Norm => 1.0 / cfg.aggregation_norm,
    };
    let mut g = hf.sum_axis(Axis(0));
    g *= agg_scale;

    let mut ffn = Vec::with_capacity(model.ffn.len());
    let mut cur = g;
    let last_layer = model.ffn.len() - 1;
    for (l, layer) in model.ffn.iter().enumerate() {
        let z = layer.w.dot(&cur) + &layer.b;
        if l == last_layer {
            ffn.push(FfnTape {
                input: cur,
                z: None,
                mask: None,
            });
            cur = z;
        } else {
            let mut a = act2(&z, kind, alpha);
            let mask = rng
                .as_mut()
                .map(|r| dropout_mask(r, a.raw_dim(), cfg.dropout));
            if let Some(mask) = &mask {
                a *= mask;
            }
            ffn.push(FfnTape {
                input: cur,
                z: Some(z),
                mask,
            });
            cur = a;
        }
    }

    Ok(Tape {
        graph,
        z0,
        h,
        steps,
        readout_in,
        readout_z,
        agg_scale,
        ffn,
        output: cur[0],
    })
}

/// Gradients of `d_output · output` with respect to every parameter.
pub fn backward(model: &ModelParams, tape: &Tape<'_>, d_output: f64) -> ModelParams {
    let cfg = &model.config;
    let (kind, alpha) = (cfg.activation, model.alpha());
    let graph = tape.graph;
    let n = graph.atom_count();
    let mut grads = model.zeros_like();
    let mut dalpha = 0.0;

    let mut up = Array1::from_elem(1, d_output);
    for (l, (layer, t)) in model.ffn.iter().zip(&tape.ffn).enumerate().rev() {
        let dz = match &t.z {
            None => up,
            Some(z) => {
                if let Some(mask) = &t.mask {
                    up *= mask;
                }
                let (dz, da) = act_back(z, &up, kind, alpha);
                dalpha += da;
                dz
            }
        };
        let gl = &mut grads.ffn[l];
        gl.w += &outer(&dz, &t.input);
        gl.b += &dz;
        up = layer.w.t().dot(&dz);
    }

    // broadcast dg to every atom
    let dhf = Array2::from_shape_fn((n, model.hidden()), |(_, j)| up[j] * tape.agg_scale);
    let (dr, da) = act_back(&tape.readout_z, &dhf, kind, alpha);
    dalpha += da;
    grads.readout.w += &dr.t().dot(&tape.readout_in);
    grads.readout.b += &dr.sum_axis(Axis(0));
    let d_in = dr.dot(&model.readout.w);
    let d_nbr = d_in.slice(s![.., model.node_width..]);

    let mut dh = Array2::zeros((n, model.hidden()));
    for &(src, dst) in &graph.edges {
        let mut r = dh.row_mut(src);
        r += &d_nbr.row(dst);
    }

    for t in (0..cfg.depth).rev() {
        let st = &tape.steps[t];
        let h_prev = &tape.h[t];
        if let Some(mask) = &st.mask {
            dh *= mask;
        }
        let (dz, da) = act_back(&st.z, &dh, kind, alpha);
        dalpha += da;
        grads.upd_self += &dz.t().dot(h_prev);
        grads.upd_msg.w += &dz.t().dot(&st.m);
        grads.upd_msg.b += &dz.sum_axis(Axis(0));
        let mut dh_prev = dz.dot(&model.upd_self);
        let dm = dz.dot(&model.upd_msg.w);

        let mut dmsgs = Array2::zeros((graph.edges.len(), model.hidden()));
        for (k, &(_, dst)) in graph.edges.iter().enumerate() {
            dmsgs.row_mut(k).assign(&dm.row(dst));
        }
        grads.msg_out.w += &dmsgs.t().dot(&st.a);
        grads.msg_out.b += &dmsgs.sum_axis(Axis(0));
        let d_a = dmsgs.dot(&model.msg_out.w);
        let (du, da) = act_back(&st.u, &d_a, kind, alpha);
        dalpha += da;
        grads.msg_edge.w += &du.t().dot(&graph.edge_features);
        grads.msg_edge.b += &du.sum_axis(Axis(0));

        let mut dp = Array2::zeros((n, model.hidden()));
        let mut dq = Array2::zeros((n, model.hidden()));
        for (k, &(src, dst)) in graph.edges.iter().enumerate() {
            let mut r = dp.row_mut(dst);
            r += &du.row(k);
            let mut r = dq.row_mut(src);
            r += &du.row(k);
        }
        grads.msg_self += &dp.t().dot(h_prev);
        grads.msg_nbr += &dq.t().dot(h_prev);
        dh_prev += &dp.dot(&model.msg_self);
        dh_prev += &dq.dot(&model.msg_nbr);
        dh = dh_prev;
    }

    let (dz0, da) = act_back(&tape.z0, &dh, kind, alpha);
    dalpha += da;
    grads.input.w += &dz0.t().dot(&graph.node_features);
    grads.input.b += &dz0.sum_axis(Axis(0));
    grads.prelu[0] = if kind == Activation::Prelu {
        dalpha
    } else {
        0.0
    };
    grads
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Loss and parameter gradients for one labelled graph.
pub fn example_gradient(
    model: &ModelParams,
    graph: &MolGraph,
    target: f64,
    mode: Mode,
) -> Result<(f64, ModelParams), MpnnError> {
    let tape = forward(model, graph, mode)?;
    let (l, d) = loss_on_output(tape.output, target, model.config.task);
    Ok((l, backward(model, &tape, d)))
}
