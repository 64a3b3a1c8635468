//! Bidirectional LSTM classifier trained without gradients.
//!
//! A `1 × D` feature is cut into `T` steps of width `d`; one LSTM chain reads
//! the steps forward, another backward, and the two final hidden states are
//! combined and scored by a logistic head. Every weight lives in one flat
//! [`ParamVector`], which is the search space handed to the optimizer.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::optim::{Bounds, Method, Objective, OptimizationResult, PLConfig};
use crate::scalar::{sigmoid, Scalar};
use crate::tfidf::FeatureVector;

pub const DEFAULT_STEPS: usize = 20;
pub const DEFAULT_HIDDEN: usize = 8;
/// Default per-coordinate search box `[-B, B]`.
pub const DEFAULT_PARAM_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelShape {
    pub steps: usize,
    pub step_dim: usize,
    pub hidden: usize,
}

impl ModelShape {
    pub fn new(steps: usize, step_dim: usize, hidden: usize) -> Result<Self> {
        if steps == 0 || step_dim == 0 || hidden == 0 {
            return Err(Error::shape(
                "steps, step_dim and hidden must all be at least 1",
            ));
        }
        Ok(Self {
            steps,
            step_dim,
            hidden,
        })
    }

    /// Splits a `feature_dim`-wide input into `steps` equal chunks.
    pub fn for_features(feature_dim: usize, steps: usize, hidden: usize) -> Result<Self> {
        if steps == 0 || !feature_dim.is_multiple_of(steps) {
            return Err(Error::shape(format!(
                "feature dimension {feature_dim} is not divisible into {steps} steps"
            )));
        }
        Self::new(steps, feature_dim / steps, hidden)
    }

    pub fn feature_dim(&self) -> usize {
        self.steps * self.step_dim
    }

    fn gate_len(&self) -> usize {
        let h = self.hidden;
        h * self.step_dim + h * h + h
    }
}

/// How the final forward and backward hidden states are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Combine {
    #[default]
    Concat,
    Add,
    Average,
    Multiply,
}

impl Combine {
    pub fn output_len(self, hidden: usize) -> usize {
        match self {
            Combine::Concat => 2 * hidden,
            _ => hidden,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Combine::Concat => "concat",
            Combine::Add => "add",
            Combine::Average => "average",
            Combine::Multiply => "multiply",
        }
    }

    fn apply<T: Scalar>(self, fwd: &[T], bwd: &[T]) -> Vec<T> {
        match self {
            Combine::Concat => fwd.iter().chain(bwd).copied().collect(),
            Combine::Add => fwd.iter().zip(bwd).map(|(&a, &b)| a + b).collect(),
            Combine::Average => fwd
                .iter()
                .zip(bwd)
                .map(|(&a, &b)| (a + b) * T::lit(0.5))
                .collect(),
            Combine::Multiply => fwd.iter().zip(bwd).map(|(&a, &b)| a * b).collect(),
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Combine::Concat),
            "add" => Ok(Combine::Add),
            "average" => Ok(Combine::Average),
            "multiply" => Ok(Combine::Multiply),
            _ => Err(Error::domain(format!("unknown combine mode {s:?}"))),
        }
    }
}

/// `W` (H×d), `U` (H×H), both row-major, and bias `b` (H).
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<T> {
    pub w: Vec<T>,
    pub u: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> GateParams<T> {
    pub fn zeros(shape: &ModelShape) -> Self {
        let h = shape.hidden;
        Self {
            w: vec![T::zero(); h * shape.step_dim],
            u: vec![T::zero(); h * h],
            b: vec![T::zero(); h],
        }
    }

    /// `b + W·x + U·h_prev`, written into `out`.
    fn preactivation<I: StepInput<T> + ?Sized>(&self, x: &I, h_prev: &[T], out: &mut [T]) {
        let hidden = h_prev.len();
        let d = self.w.len() / hidden;
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = self.b[r] + x.dot_row(&self.w[r * d..(r + 1) * d]);
            for (&u, &h) in self.u[r * hidden..(r + 1) * hidden].iter().zip(h_prev) {
                acc = acc + u * h;
            }
            *o = acc;
        }
    }
}

/// Input, forget and output gates plus the candidate transform.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<T> {
    pub input_gate: GateParams<T>,
    pub forget_gate: GateParams<T>,
    pub output_gate: GateParams<T>,
    pub candidate: GateParams<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(shape: &ModelShape) -> Self {
        Self {
            input_gate: GateParams::zeros(shape),
            forget_gate: GateParams::zeros(shape),
            output_gate: GateParams::zeros(shape),
            candidate: GateParams::zeros(shape),
        }
    }

    fn gates(&self) -> [&GateParams<T>; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.output_gate,
            &self.candidate,
        ]
    }

    fn gates_mut(&mut self) -> [&mut GateParams<T>; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel<T> {
    pub forward: LstmParams<T>,
    pub backward: LstmParams<T>,
    pub head_w: Vec<T>,
    pub head_b: T,
    pub combine: Combine,
    pub shape: ModelShape,
}

impl<T: Scalar> BiLstmModel<T> {
    pub fn zeros(shape: ModelShape, combine: Combine) -> Self {
        Self {
            forward: LstmParams::zeros(&shape),
            backward: LstmParams::zeros(&shape),
            head_w: vec![T::zero(); combine.output_len(shape.hidden)],
            head_b: T::zero(),
            combine,
            shape,
        }
    }
}

/// One step's input, dense or as sorted `(index, value)` nonzeros.
trait StepInput<T> {
    fn dot_row(&self, row: &[T]) -> T;
}

impl<T: Scalar> StepInput<T> for [T] {
    fn dot_row(&self, row: &[T]) -> T {
        self.iter()
            .zip(row)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * x)
    }
}

impl<T: Scalar> StepInput<T> for [(usize, T)] {
    fn dot_row(&self, row: &[T]) -> T {
        // Skipping zero entries leaves the dense sum bit-for-bit unchanged.
        self.iter().fold(T::zero(), |acc, &(j, x)| acc + row[j] * x)
    }
}

fn step_into<T: Scalar, I: StepInput<T> + ?Sized>(
    params: &LstmParams<T>,
    x: &I,
    h: &mut [T],
    c: &mut [T],
    scratch: &mut [Vec<T>; 4],
) {
    for (gate, out) in params.gates().into_iter().zip(scratch.iter_mut()) {
        gate.preactivation(x, h, out);
    }
    let [input, forget, output, candidate] = scratch;
    for r in 0..h.len() {
        c[r] = sigmoid(forget[r]) * c[r] + sigmoid(input[r]) * candidate[r].tanh();
        h[r] = sigmoid(output[r]) * c[r].tanh();
    }
}

/// One LSTM cell update:
/// `E = σ(W_E x + U_E h + b_E)`, `J = σ(W_J x + U_J h + b_J)`,
/// `P = σ(W_P x + U_P h + b_P)`, `c' = J ⊙ c + E ⊙ tanh(W_m x + U_m h + b_m)`,
/// `h' = P ⊙ tanh(c')`, with `E` the input gate, `J` the forget gate and `P`
/// the output gate.
pub fn lstm_step<T: Scalar>(
    params: &LstmParams<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> (Vec<T>, Vec<T>) {
    let hidden = h_prev.len();
    let mut h = h_prev.to_vec();
    let mut c = c_prev.to_vec();
    let mut scratch: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hidden]);
    step_into(params, x, &mut h, &mut c, &mut scratch);
    (h, c)
}

/// Step `t` holds entries `[t·d, (t+1)·d)` of the feature.
pub fn reshape_input<T: Scalar>(
    feature: &FeatureVector<T>,
    shape: &ModelShape,
) -> Result<Vec<Vec<T>>> {
    if feature.dimension() != shape.feature_dim() {
        return Err(Error::shape(format!(
            "feature of dimension {} does not fit {} steps of {}",
            feature.dimension(),
            shape.steps,
            shape.step_dim
        )));
    }
    Ok(feature
        .values
        .chunks(shape.step_dim)
        .map(<[T]>::to_vec)
        .collect())
}

fn run_chains<T: Scalar, I: StepInput<T> + ?Sized, S: AsRef<I>>(
    model: &BiLstmModel<T>,
    steps: &[S],
) -> Vec<T> {
    let hidden = model.shape.hidden;
    let mut scratch: [Vec<T>; 4] = std::array::from_fn(|_| vec![T::zero(); hidden]);
    let mut hf = vec![T::zero(); hidden];
    let mut cf = vec![T::zero(); hidden];
    for x in steps {
        step_into(&model.forward, x.as_ref(), &mut hf, &mut cf, &mut scratch);
    }
    let mut hb = vec![T::zero(); hidden];
    let mut cb = vec![T::zero(); hidden];
    for x in steps.iter().rev() {
        step_into(&model.backward, x.as_ref(), &mut hb, &mut cb, &mut scratch);
    }
    model.combine.apply(&hf, &hb)
}

/// Forward chain over steps `1..T`, backward chain over `T..1`, both from
/// zero state; returns `combine(h_fwd(T), h_bwd(1))`.
pub fn bilstm_forward<T: Scalar>(model: &BiLstmModel<T>, sequence: &[Vec<T>]) -> Result<Vec<T>> {
    check_sequence(
        model,
        sequence.len(),
        sequence.iter().all(|s| s.len() == model.shape.step_dim),
    )?;
    Ok(run_chains::<T, [T], _>(model, sequence))
}

fn check_sequence<T: Scalar>(model: &BiLstmModel<T>, steps: usize, widths_ok: bool) -> Result<()> {
    if steps != model.shape.steps || !widths_ok {
        return Err(Error::shape(format!(
            "sequence does not match {} steps of {}",
            model.shape.steps, model.shape.step_dim
        )));
    }
    Ok(())
}

fn head<T: Scalar>(model: &BiLstmModel<T>, combined: &[T]) -> T {
    let z = model
        .head_w
        .iter()
        .zip(combined)
        .fold(model.head_b, |acc, (&w, &v)| acc + w * v);
    sigmoid(z)
}

/// Recommendation score `σ(head_w · combined + head_b)` in `(0, 1)`.
pub fn predict<T: Scalar>(model: &BiLstmModel<T>, feature: &FeatureVector<T>) -> Result<T> {
    let sequence = reshape_input(feature, &model.shape)?;
    Ok(head(model, &bilstm_forward(model, &sequence)?))
}

/// A feature pre-cut into steps of sorted nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSequence<T> {
    steps: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> SparseSequence<T> {
    pub fn new(feature: &FeatureVector<T>, shape: &ModelShape) -> Result<Self> {
        let steps = reshape_input(feature, shape)?
            .into_iter()
            .map(|chunk| {
                chunk
                    .into_iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .collect()
            })
            .collect();
        Ok(Self { steps })
    }

    pub fn nonzeros(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }
}

/// Same value as [`predict`] on the dense feature, bit for bit.
pub fn predict_sparse<T: Scalar>(
    model: &BiLstmModel<T>,
    sequence: &SparseSequence<T>,
) -> Result<T> {
    check_sequence(model, sequence.steps.len(), true)?;
    Ok(head(
        model,
        &run_chains::<T, [(usize, T)], _>(model, &sequence.steps),
    ))
}

/// Flat parameters plus the shape and combine mode needed to rebuild a model.
///
/// Layout: forward gates E, J, P, m (each `W` row-major, `U` row-major,
/// `b`), then the backward gates likewise, then `head_w`, then `head_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    pub values: Vec<T>,
    pub shape: ModelShape,
    pub combine: Combine,
}

/// `2·4·(H·d + H·H + H) + |head_w| + 1`.
pub fn param_count(shape: &ModelShape, combine: Combine) -> usize {
    8 * shape.gate_len() + combine.output_len(shape.hidden) + 1
}

pub fn flatten<T: Scalar>(model: &BiLstmModel<T>) -> ParamVector<T> {
    let mut values = Vec::with_capacity(param_count(&model.shape, model.combine));
    for chain in [&model.forward, &model.backward] {
        for gate in chain.gates() {
            values.extend_from_slice(&gate.w);
            values.extend_from_slice(&gate.u);
            values.extend_from_slice(&gate.b);
        }
    }
    values.extend_from_slice(&model.head_w);
    values.push(model.head_b);
    ParamVector {
        values,
        shape: model.shape,
        combine: model.combine,
    }
}

pub fn unflatten<T: Scalar>(
    values: &[T],
    shape: ModelShape,
    combine: Combine,
) -> Result<BiLstmModel<T>> {
    let expected = param_count(&shape, combine);
    if values.len() != expected {
        return Err(Error::shape(format!(
            "parameter vector has {} values, layout needs {expected}",
            values.len()
        )));
    }
    let mut model = BiLstmModel::zeros(shape, combine);
    let mut rest = values;
    let mut take = |dst: &mut [T]| {
        let (head, tail) = rest.split_at(dst.len());
        dst.copy_from_slice(head);
        rest = tail;
    };
    for chain in [&mut model.forward, &mut model.backward] {
        for gate in chain.gates_mut() {
            take(&mut gate.w);
            take(&mut gate.u);
            take(&mut gate.b);
        }
    }
    take(&mut model.head_w);
    let mut bias = [T::zero()];
    take(&mut bias);
    model.head_b = bias[0];
    Ok(model)
}

impl<T: Scalar> ParamVector<T> {
    pub fn to_model(&self) -> Result<BiLstmModel<T>> {
        unflatten(&self.values, self.shape, self.combine)
    }
}

/// Mean squared error between scores and labels over a pre-cut dataset.
/// This is the fitness the optimizer minimizes.
#[derive(Debug, Clone)]
pub struct MseObjective<T> {
    sequences: Vec<SparseSequence<T>>,
    labels: Vec<T>,
    shape: ModelShape,
    combine: Combine,
}

impl<T: Scalar> MseObjective<T> {
    pub fn new(
        dataset: &[(FeatureVector<T>, u8)],
        shape: ModelShape,
        combine: Combine,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::domain("mse needs at least one example"));
        }
        let sequences = dataset
            .iter()
            .map(|(f, _)| SparseSequence::new(f, &shape))
            .collect::<Result<_>>()?;
        let labels = dataset.iter().map(|&(_, l)| T::lit(f64::from(l))).collect();
        Ok(Self {
            sequences,
            labels,
            shape,
            combine,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn mse_of(&self, model: &BiLstmModel<T>) -> T {
        let total =
            self.sequences
                .iter()
                .zip(&self.labels)
                .fold(T::zero(), |acc, (seq, &label)| {
                    let score = head(model, &run_chains::<T, [(usize, T)], _>(model, &seq.steps));
                    acc + (score - label) * (score - label)
                });
        total / T::lit(self.labels.len() as f64)
    }
}

impl<T: Scalar> Objective<T> for MseObjective<T> {
    fn dim(&self) -> usize {
        param_count(&self.shape, self.combine)
    }

    fn evaluate(&self, x: &[T]) -> T {
        match unflatten(x, self.shape, self.combine) {
            Ok(model) => self.mse_of(&model),
            Err(_) => T::nan(),
        }
    }
}

/// Mean of `(predict − label)²` over the dataset.
pub fn mse_objective<T: Scalar>(
    params: &ParamVector<T>,
    dataset: &[(FeatureVector<T>, u8)],
    shape: ModelShape,
    combine: Combine,
) -> Result<T> {
    let objective = MseObjective::new(dataset, shape, combine)?;
    let model = unflatten(&params.values, shape, combine)?;
    Ok(objective.mse_of(&model))
}

/// Searches the parameter box `[-bound, bound]^P` for the model with the
/// lowest training MSE.
pub fn train<T: Scalar>(
    train_set: &[(FeatureVector<T>, u8)],
    shape: ModelShape,
    combine: Combine,
    opt_config: &PLConfig<T>,
    bound: T,
    method: Method,
) -> Result<(BiLstmModel<T>, OptimizationResult<T>)> {
    let objective = MseObjective::new(train_set, shape, combine)?;
    let config = opt_config
        .clone()
        .with_bounds(Bounds::uniform(objective.dim(), -bound, bound));
    let result = method.run(&objective, &config)?;
    let model = unflatten(&result.best_position, shape, combine)?;
    Ok((model, result))
}

/// Everything besides the parameter values needed to restore a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub shape: ModelShape,
    pub combine: Combine,
    pub bound: f64,
}

impl ModelHeader {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bilstm v1")?;
        writeln!(out, "steps = {}", self.shape.steps)?;
        writeln!(out, "step_dim = {}", self.shape.step_dim)?;
        writeln!(out, "hidden = {}", self.shape.hidden)?;
        writeln!(out, "combine = {}", self.combine)?;
        writeln!(out, "bound = {}", sig(self.bound, 17))?;
        writeln!(out, "params = {}", param_count(&self.shape, self.combine))?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        if lines.next().transpose()?.as_deref() != Some("bilstm v1") {
            return Err(Error::parse("model header must start with `bilstm v1`"));
        }
        let (mut steps, mut step_dim, mut hidden, mut combine, mut bound, mut params) =
            (None, None, None, None, None, None);
        for line in lines {
            let line = line?;
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let value = value.trim();
            let num = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::parse(format!("bad value {value:?}")))
            };
            match key.trim() {
                "steps" => steps = Some(num()?),
                "step_dim" => step_dim = Some(num()?),
                "hidden" => hidden = Some(num()?),
                "params" => params = Some(num()?),
                "combine" => combine = Some(value.parse()?),
                "bound" => {
                    bound = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| Error::parse("bad bound"))?,
                    )
                }
                other => return Err(Error::parse(format!("unknown model header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::parse(format!("model header lacks {k}"));
        let shape = ModelShape::new(
            steps.ok_or_else(|| missing("steps"))?,
            step_dim.ok_or_else(|| missing("step_dim"))?,
            hidden.ok_or_else(|| missing("hidden"))?,
        )?;
        let header = Self {
            shape,
            combine: combine.ok_or_else(|| missing("combine"))?,
            bound: bound.ok_or_else(|| missing("bound"))?,
        };
        if let Some(p) = params {
            if p != param_count(&header.shape, header.combine) {
                return Err(Error::parse(format!(
                    "header records {p} params, layout implies {}",
                    param_count(&header.shape, header.combine)
                )));
            }
        }
        Ok(header)
    }
}

/// One value per line with 17 significant digits.
pub fn write_params_csv<T: Scalar, W: Write>(params: &ParamVector<T>, mut out: W) -> Result<()> {
    for v in &params.values {
        writeln!(out, "{}", sig(v.as_f64(), 17))?;
    }
    Ok(())
}

pub fn read_params_csv<T: Scalar, R: BufRead>(
    input: R,
    header: &ModelHeader,
) -> Result<ParamVector<T>> {
    let values = input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l?;
            l.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::parse(format!("bad parameter {l:?}")))
        })
        .collect::<Result<Vec<T>>>()?;
    let params = ParamVector {
        values,
        shape: header.shape,
        combine: header.combine,
    };
    params.to_model()?;
    Ok(params)
}
