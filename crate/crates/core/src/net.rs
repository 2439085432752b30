//! Modular simple recurrent network.
//!
//! Each hidden module is an Elman layer: its units see the current input
//! phone and, through time-delay connections, the module's own activation
//! from the previous step. Output heads read from one or more modules.
//! Training is online backpropagation with the previous-step context held
//! as a constant input (truncation depth 1) and classical momentum.
//!
//! All weights and biases live in one flat parameter vector; a [`Layout`]
//! records where every block starts. The gradient check and the optimizer
//! both work directly on that vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Logistic,
    /// Identity; only used to check gradients on an exactly quadratic loss.
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    pub fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Logistic => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadRole {
    /// Auto-association of the current input phone.
    PhoneCopy,
    /// Localist root identity.
    Root,
    /// Localist value of one inflectional category.
    Inflection,
    /// Single unit read with a 0.5 threshold.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub name: String,
    pub width: usize,
    /// Names of the heads this module connects to.
    pub feeds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub width: usize,
    pub role: HeadRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_width: usize,
    pub modules: Vec<ModuleSpec>,
    pub heads: Vec<HeadSpec>,
    #[serde(default)]
    pub activation: Activation,
    pub weight_init_range: f64,
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.04;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_INIT_RANGE: f64 = 0.5;
pub const DEFAULT_SLOPE_OFFSET: f64 = 0.1;
pub const ROOT_MODULE: &str = "root";
pub const INFLECTION_MODULE: &str = "inflection";
pub const PHONE_HEAD: &str = "phone";

impl NetworkSpec {
    /// Version-1 layout: a root module feeding the root head, an inflection
    /// module feeding every category head, and both feeding the phone copy.
    pub fn modular(
        input_width: usize,
        root_count: usize,
        categories: &[(&str, usize)],
        root_hidden: usize,
        inflection_hidden: usize,
    ) -> Self {
        let mut heads = vec![
            HeadSpec {
                name: PHONE_HEAD.into(),
                width: input_width,
                role: HeadRole::PhoneCopy,
            },
            HeadSpec {
                name: ROOT_MODULE.into(),
                width: root_count,
                role: HeadRole::Root,
            },
        ];
        heads.extend(categories.iter().map(|&(name, width)| HeadSpec {
            name: name.into(),
            width,
            role: HeadRole::Inflection,
        }));
        let mut infl_feeds = vec![PHONE_HEAD.to_string()];
        infl_feeds.extend(categories.iter().map(|(n, _)| n.to_string()));
        NetworkSpec {
            input_width,
            modules: vec![
                ModuleSpec {
                    name: ROOT_MODULE.into(),
                    width: root_hidden,
                    feeds: vec![PHONE_HEAD.into(), ROOT_MODULE.into()],
                },
                ModuleSpec {
                    name: INFLECTION_MODULE.into(),
                    width: inflection_hidden,
                    feeds: infl_feeds,
                },
            ],
            heads,
            activation: Activation::Logistic,
            weight_init_range: DEFAULT_INIT_RANGE,
        }
    }

    /// One hidden module feeding a phone-copy head and one task head.
    pub fn single(input_width: usize, hidden: usize, head: HeadSpec) -> Self {
        NetworkSpec {
            input_width,
            modules: vec![ModuleSpec {
                name: "hidden".into(),
                width: hidden,
                feeds: vec![PHONE_HEAD.into(), head.name.clone()],
            }],
            heads: vec![
                HeadSpec {
                    name: PHONE_HEAD.into(),
                    width: input_width,
                    role: HeadRole::PhoneCopy,
                },
                head,
            ],
            activation: Activation::Logistic,
            weight_init_range: DEFAULT_INIT_RANGE,
        }
    }

    pub fn with_init_range(mut self, range: f64) -> Self {
        self.weight_init_range = range;
        self
    }

    pub fn module_index(&self, name: &str) -> Option<usize> {
        self.modules.iter().position(|m| m.name == name)
    }

    pub fn head_index(&self, name: &str) -> Option<usize> {
        self.heads.iter().position(|h| h.name == name)
    }

    /// Indices of the modules feeding head `h`, in module order.
    pub fn sources(&self, h: usize) -> Vec<usize> {
        let name = &self.heads[h].name;
        (0..self.modules.len())
            .filter(|&m| self.modules[m].feeds.contains(name))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            return Err(Error::Config("input layer has zero width".into()));
        }
        if self.modules.is_empty() || self.heads.is_empty() {
            return Err(Error::Config("network needs at least one module and one head".into()));
        }
        if !(self.weight_init_range.is_finite() && self.weight_init_range >= 0.0) {
            return Err(Error::Config("weight_init_range must be finite and >= 0".into()));
        }
        for m in &self.modules {
            if m.width == 0 {
                return Err(Error::Config(format!("module `{}` has zero width", m.name)));
            }
            for f in &m.feeds {
                if self.head_index(f).is_none() {
                    return Err(Error::Config(format!(
                        "module `{}` feeds unknown head `{f}`",
                        m.name
                    )));
                }
            }
        }
        for (h, head) in self.heads.iter().enumerate() {
            if head.width == 0 {
                return Err(Error::Config(format!("head `{}` has zero width", head.name)));
            }
            if self.sources(h).is_empty() {
                return Err(Error::Config(format!("head `{}` has no source module", head.name)));
            }
            if head.role == HeadRole::PhoneCopy && head.width != self.input_width {
                return Err(Error::Config("phone-copy head must match the input width".into()));
            }
            if self.heads[..h].iter().any(|o| o.name == head.name) {
                return Err(Error::Config(format!("duplicate head `{}`", head.name)));
            }
        }
        Ok(())
    }

    /// Checks the root/inflection separation of the modular architecture.
    pub fn check_modular(&self) -> Result<()> {
        self.validate()?;
        let feeding = |role: HeadRole| -> Vec<Vec<usize>> {
            (0..self.heads.len())
                .filter(|&h| self.heads[h].role == role)
                .map(|h| self.sources(h))
                .collect()
        };
        let root = feeding(HeadRole::Root);
        let [root_src] = root.as_slice() else {
            return Err(Error::Config("expected exactly one root head".into()));
        };
        let [root_module] = root_src.as_slice() else {
            return Err(Error::Config("exactly one module must feed the root head".into()));
        };
        let infl = feeding(HeadRole::Inflection);
        let Some(first) = infl.first() else {
            return Err(Error::Config("no inflection heads".into()));
        };
        let [infl_module] = first.as_slice() else {
            return Err(Error::Config("exactly one module must feed inflections".into()));
        };
        if infl.iter().any(|s| s != first) || infl_module == root_module {
            return Err(Error::Config(
                "one module, distinct from the root module, must feed all inflection heads"
                    .into(),
            ));
        }
        for src in feeding(HeadRole::PhoneCopy) {
            if src.len() != self.modules.len() {
                return Err(Error::Config("every module must feed the phone-copy head".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Constant added to the output-unit sigmoid derivative during training
    /// so saturated wrong outputs still receive error. Zero gives plain
    /// gradient descent.
    #[serde(default)]
    pub slope_offset: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            epochs: 150,
            seed: 0,
            slope_offset: DEFAULT_SLOPE_OFFSET,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.slope_offset >= 0.0 && self.slope_offset.is_finite()) {
            return Err(Error::Config("slope_offset must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    offset: usize,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone)]
struct ModuleLayout {
    input: Block,
    recurrent: Block,
    bias: usize,
    width: usize,
}

#[derive(Debug, Clone)]
struct HeadLayout {
    /// (module index, weight block) per source.
    sources: Vec<(usize, Block)>,
    bias: usize,
    width: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    modules: Vec<ModuleLayout>,
    heads: Vec<HeadLayout>,
    len: usize,
}

impl Layout {
    fn new(spec: &NetworkSpec) -> Self {
        let mut len = 0;
        let mut block = |rows: usize, cols: usize| {
            let b = Block {
                offset: len,
                rows,
                cols,
            };
            len += rows * cols;
            b
        };
        let modules: Vec<ModuleLayout> = spec
            .modules
            .iter()
            .map(|m| {
                let input = block(m.width, spec.input_width);
                let recurrent = block(m.width, m.width);
                let bias = block(m.width, 1).offset;
                ModuleLayout {
                    input,
                    recurrent,
                    bias,
                    width: m.width,
                }
            })
            .collect();
        let heads = (0..spec.heads.len())
            .map(|h| {
                let width = spec.heads[h].width;
                let sources = spec
                    .sources(h)
                    .into_iter()
                    .map(|m| (m, block(width, spec.modules[m].width)))
                    .collect();
                let bias = block(width, 1).offset;
                HeadLayout {
                    sources,
                    bias,
                    width,
                }
            })
            .collect();
        Layout {
            modules,
            heads,
            len,
        }
    }
}

/// y += W x for a row-major block of `params`.
#[inline]
fn gemv_acc(params: &[f64], b: Block, x: &[f64], y: &mut [f64]) {
    let w = &params[b.offset..b.offset + b.rows * b.cols];
    for (yi, row) in y.iter_mut().zip(w.chunks_exact(b.cols)) {
        *yi += row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
    }
}

/// g += d x^T
#[inline]
fn outer_acc(grad: &mut [f64], b: Block, d: &[f64], x: &[f64]) {
    let g = &mut grad[b.offset..b.offset + b.rows * b.cols];
    for (row, &di) in g.chunks_exact_mut(b.cols).zip(d) {
        if di != 0.0 {
            for (gij, &xj) in row.iter_mut().zip(x) {
                *gij += di * xj;
            }
        }
    }
}

/// y += W^T d
#[inline]
fn gemv_t_acc(params: &[f64], b: Block, d: &[f64], y: &mut [f64]) {
    let w = &params[b.offset..b.offset + b.rows * b.cols];
    for (row, &di) in w.chunks_exact(b.cols).zip(d) {
        for (yj, &wij) in y.iter_mut().zip(row) {
            *yj += wij * di;
        }
    }
}

fn compute_into(
    layout: &Layout,
    params: &[f64],
    act: Activation,
    input: &[f64],
    context: &[Vec<f64>],
    out: &mut StepState,
) {
    for (m, ml) in layout.modules.iter().enumerate() {
        let h = &mut out.hidden[m];
        h.copy_from_slice(&params[ml.bias..ml.bias + ml.width]);
        gemv_acc(params, ml.input, input, h);
        gemv_acc(params, ml.recurrent, &context[m], h);
        h.iter_mut().for_each(|v| *v = act.apply(*v));
    }
    for (h, hl) in layout.heads.iter().enumerate() {
        let y = &mut out.outputs[h];
        y.copy_from_slice(&params[hl.bias..hl.bias + hl.width]);
        for &(m, b) in &hl.sources {
            gemv_acc(params, b, &out.hidden[m], y);
        }
        y.iter_mut().for_each(|v| *v = act.apply(*v));
    }
}

/// Activations of one forward step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub hidden: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl StepState {
    fn zeros(spec: &NetworkSpec) -> Self {
        StepState {
            hidden: spec.modules.iter().map(|m| vec![0.0; m.width]).collect(),
            outputs: spec.heads.iter().map(|h| vec![0.0; h.width]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    input: Vec<f64>,
    prev_context: Vec<Vec<f64>>,
    state: StepState,
    valid: bool,
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
    params: Vec<f64>,
    velocity: Vec<f64>,
    grad: Vec<f64>,
    context: Vec<Vec<f64>>,
    cache: StepCache,
    // scratch for hidden deltas
    delta_hidden: Vec<Vec<f64>>,
    delta_out: Vec<Vec<f64>>,
}

/// Builds a network with weights uniform in [-r, r] and zero contexts.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    Network::new(spec.clone(), seed)
}

impl Network {
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = spec.weight_init_range;
        let params: Vec<f64> = (0..layout.len)
            .map(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 })
            .collect();
        Self::from_params(spec, params)
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        if params.len() != layout.len {
            return Err(Error::Shape {
                expected: layout.len,
                actual: params.len(),
            });
        }
        let context: Vec<Vec<f64>> = spec.modules.iter().map(|m| vec![0.0; m.width]).collect();
        Ok(Network {
            cache: StepCache {
                input: vec![0.0; spec.input_width],
                prev_context: context.clone(),
                state: StepState::zeros(&spec),
                valid: false,
            },
            delta_hidden: context.clone(),
            delta_out: spec.heads.iter().map(|h| vec![0.0; h.width]).collect(),
            velocity: vec![0.0; layout.len],
            grad: vec![0.0; layout.len],
            context,
            params,
            layout,
            spec,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Gradient from the most recent [`Network::compute_gradient`].
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    /// Parameter indices of module `m`'s recurrent weight block.
    pub fn recurrent_range(&self, m: usize) -> std::ops::Range<usize> {
        let b = self.layout.modules[m].recurrent;
        b.offset..b.offset + b.rows * b.cols
    }

    pub fn context(&self) -> &[Vec<f64>] {
        &self.context
    }

    pub fn set_context(&mut self, module: usize, values: &[f64]) -> Result<()> {
        let ctx = &mut self.context[module];
        if values.len() != ctx.len() {
            return Err(Error::Shape {
                expected: ctx.len(),
                actual: values.len(),
            });
        }
        ctx.copy_from_slice(values);
        Ok(())
    }

    /// Zeros every module's context (start of a word).
    pub fn reset_context(&mut self) {
        for c in &mut self.context {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        self.cache.valid = false;
    }

    /// Pure forward computation from an explicit context.
    pub fn compute(&self, input: &[f64], context: &[Vec<f64>], out: &mut StepState) {
        compute_into(&self.layout, &self.params, self.spec.activation, input, context, out);
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_width {
            return Err(Error::Shape {
                expected: self.spec.input_width,
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// One time step: updates every context and returns the head outputs.
    pub fn forward_step(&mut self, input: &[f64]) -> Result<&[Vec<f64>]> {
        self.check_input(input)?;
        compute_into(
            &self.layout,
            &self.params,
            self.spec.activation,
            input,
            &self.context,
            &mut self.cache.state,
        );
        self.cache.input.copy_from_slice(input);
        for (prev, cur) in self.cache.prev_context.iter_mut().zip(&self.context) {
            prev.copy_from_slice(cur);
        }
        for (ctx, h) in self.context.iter_mut().zip(&self.cache.state.hidden) {
            ctx.copy_from_slice(h);
        }
        self.cache.valid = true;
        Ok(&self.cache.state.outputs)
    }

    /// State of the most recent forward step.
    pub fn last_state(&self) -> Option<&StepState> {
        self.cache.valid.then_some(&self.cache.state)
    }

    fn check_targets(&self, targets: &[&[f64]]) -> Result<()> {
        if targets.len() != self.spec.heads.len() {
            return Err(Error::Contract(format!(
                "{} targets given for {} heads",
                targets.len(),
                self.spec.heads.len()
            )));
        }
        for (t, h) in targets.iter().zip(&self.spec.heads) {
            if t.len() != h.width {
                return Err(Error::Shape {
                    expected: h.width,
                    actual: t.len(),
                });
            }
        }
        Ok(())
    }

    /// Half summed squared error of a state against per-head targets.
    pub fn loss(state: &StepState, targets: &[&[f64]]) -> f64 {
        state
            .outputs
            .iter()
            .zip(targets)
            .map(|(y, t)| y.iter().zip(*t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            * 0.5
    }

    /// Gradient of the one-step loss for the last forward step, with the
    /// previous context treated as a constant input. Returns the loss.
    pub fn compute_gradient(&mut self, targets: &[&[f64]]) -> Result<f64> {
        self.compute_direction(targets, 0.0)
    }

    /// Like [`Network::compute_gradient`] but with `slope_offset` added to
    /// every output-unit derivative.
    fn compute_direction(&mut self, targets: &[&[f64]], slope_offset: f64) -> Result<f64> {
        if !self.cache.valid {
            return Err(Error::Contract("backward step without a preceding forward step".into()));
        }
        self.check_targets(targets)?;
        let act = self.spec.activation;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let state = &self.cache.state;
        let loss = Self::loss(state, targets);

        for d in &mut self.delta_hidden {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        for (h, hl) in self.layout.heads.iter().enumerate() {
            let y = &state.outputs[h];
            let d = &mut self.delta_out[h];
            for ((di, &yi), &ti) in d.iter_mut().zip(y).zip(targets[h]) {
                *di = (yi - ti) * (act.slope(yi) + slope_offset);
            }
            for &(m, b) in &hl.sources {
                outer_acc(&mut self.grad, b, d, &state.hidden[m]);
                gemv_t_acc(&self.params, b, d, &mut self.delta_hidden[m]);
            }
            for (g, &di) in self.grad[hl.bias..hl.bias + hl.width].iter_mut().zip(d.iter()) {
                *g += di;
            }
        }
        for (m, ml) in self.layout.modules.iter().enumerate() {
            let d = &mut self.delta_hidden[m];
            for (di, &hi) in d.iter_mut().zip(&state.hidden[m]) {
                *di *= act.slope(hi);
            }
            outer_acc(&mut self.grad, ml.input, d, &self.cache.input);
            outer_acc(&mut self.grad, ml.recurrent, d, &self.cache.prev_context[m]);
            for (g, &di) in self.grad[ml.bias..ml.bias + ml.width].iter_mut().zip(d.iter()) {
                *g += di;
            }
        }
        Ok(loss)
    }

    /// Momentum step along the stored gradient.
    pub fn apply_update(&mut self, config: &TrainConfig) {
        let (lr, mu) = (config.learning_rate, config.momentum);
        for ((p, v), g) in self.params.iter_mut().zip(&mut self.velocity).zip(&self.grad) {
            *v = mu * *v - lr * g;
            *p += *v;
        }
    }

    /// Gradient plus weight update for the last forward step. Returns the
    /// loss before the update.
    pub fn backward_step(&mut self, targets: &[&[f64]], config: &TrainConfig) -> Result<f64> {
        let loss = self.compute_direction(targets, config.slope_offset)?;
        self.apply_update(config);
        Ok(loss)
    }

    /// Runs `phones` from a zero context without touching the network and
    /// returns the state after the last phone.
    pub fn infer(&self, phones: &[Vec<f64>]) -> Result<StepState> {
        let mut ctx: Vec<Vec<f64>> = self.spec.modules.iter().map(|m| vec![0.0; m.width]).collect();
        let mut state = StepState::zeros(&self.spec);
        for x in phones {
            self.check_input(x)?;
            self.compute(x, &ctx, &mut state);
            for (c, h) in ctx.iter_mut().zip(&state.hidden) {
                c.copy_from_slice(h);
            }
        }
        Ok(state)
    }

    /// Like [`Network::infer`] but returns the state after every phone.
    pub fn infer_all(&self, phones: &[Vec<f64>]) -> Result<Vec<StepState>> {
        let mut ctx: Vec<Vec<f64>> = self.spec.modules.iter().map(|m| vec![0.0; m.width]).collect();
        let mut out = Vec::with_capacity(phones.len());
        for x in phones {
            self.check_input(x)?;
            let mut state = StepState::zeros(&self.spec);
            self.compute(x, &ctx, &mut state);
            for (c, h) in ctx.iter_mut().zip(&state.hidden) {
                c.copy_from_slice(h);
            }
            out.push(state);
        }
        Ok(out)
    }
}

/// Largest relative deviation between the analytic gradient and central
/// finite differences of the one-step loss, over every parameter.
///
/// The context is filled with random activations first so the recurrent
/// weights receive non-zero gradient. `epsilon` is both the difference step
/// and the floor of the relative-error denominator.
pub fn gradient_check(spec: &NetworkSpec, seed: u64, epsilon: f64) -> Result<f64> {
    let mut net = Network::new(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for m in 0..spec.modules.len() {
        let ctx: Vec<f64> = (0..spec.modules[m].width)
            .map(|_| rng.random_range(0.05..0.95))
            .collect();
        net.set_context(m, &ctx)?;
    }
    let input: Vec<f64> = (0..spec.input_width).map(|_| rng.random_range(0.0..1.0)).collect();
    let targets: Vec<Vec<f64>> = spec
        .heads
        .iter()
        .map(|h| (0..h.width).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let target_refs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();

    let context = net.context().to_vec();
    net.forward_step(&input)?;
    net.compute_gradient(&target_refs)?;
    let analytic = net.gradient().to_vec();

    let mut state = StepState::zeros(spec);
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net.params[i];
        net.params[i] = orig + epsilon;
        net.compute(&input, &context, &mut state);
        let up = Network::loss(&state, &target_refs);
        net.params[i] = orig - epsilon;
        net.compute(&input, &context, &mut state);
        let down = Network::loss(&state, &target_refs);
        net.params[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let dev = (a - numeric).abs() / numeric.abs().max(epsilon);
        worst = worst.max(dev);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(input: usize, hidden: usize, out: usize) -> NetworkSpec {
        NetworkSpec {
            input_width: input,
            modules: vec![ModuleSpec {
                name: "h".into(),
                width: hidden,
                feeds: vec!["y".into()],
            }],
            heads: vec![HeadSpec {
                name: "y".into(),
                width: out,
                role: HeadRole::Inflection,
            }],
            activation: Activation::Logistic,
            weight_init_range: 0.5,
        }
    }

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    #[test]
    fn init_is_seeded() {
        let spec = NetworkSpec::modular(10, 30, &[("tense", 2)], 15, 15);
        let a = init_network(&spec, 1).unwrap();
        let b = init_network(&spec, 1).unwrap();
        let c = init_network(&spec, 2).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        assert!(a.params().iter().all(|p| p.abs() <= 0.5));
        assert!(a.context().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_width_rejected() {
        let spec = NetworkSpec::modular(10, 30, &[("tense", 2)], 0, 15);
        assert!(matches!(init_network(&spec, 1), Err(Error::Config(_))));
        let spec = NetworkSpec::modular(0, 30, &[("tense", 2)], 15, 15);
        assert!(init_network(&spec, 1).is_err());
    }

    #[test]
    fn modular_spec_shape() {
        let spec = NetworkSpec::modular(10, 30, &[("tense", 2), ("aspect", 2)], 15, 15);
        spec.check_modular().unwrap();
        assert_eq!(spec.sources(0), vec![0, 1]);
        assert_eq!(spec.sources(1), vec![0]);
        assert_eq!(spec.sources(2), vec![1]);
        let mut bad = spec.clone();
        bad.modules[0].feeds.push("tense".into());
        assert!(bad.check_modular().is_err());
        let mut bad = spec.clone();
        bad.modules[1].feeds.retain(|f| f != PHONE_HEAD);
        assert!(bad.check_modular().is_err());
    }

    #[test]
    fn zero_weights_give_half() {
        let spec = NetworkSpec::modular(10, 30, &[("tense", 2)], 15, 15).with_init_range(0.0);
        let mut net = init_network(&spec, 0).unwrap();
        let out = net.forward_step(&[1.0; 10]).unwrap();
        let widths: Vec<usize> = out.iter().map(Vec::len).collect();
        assert_eq!(widths, vec![10, 30, 2]);
        assert!(out.iter().flatten().all(|&v| v == 0.5));
    }

    #[test]
    fn hand_computed_forward() {
        // 2 inputs, 2 hidden, 1 output; parameter order: W_in, W_rec, b_h, W_out, b_out.
        let spec = small(2, 2, 1);
        let params = vec![
            0.1, -0.2, 0.3, 0.4, // W_in
            0.5, -0.6, 0.7, 0.8, // W_rec
            0.05, -0.05, // b_h
            1.5, -2.0, // W_out
            0.25, // b_out
        ];
        let mut net = Network::from_params(spec, params).unwrap();
        let x = [1.0, 0.5];
        let h1 = [sigmoid(0.1 - 0.1 + 0.05), sigmoid(0.3 + 0.2 - 0.05)];
        let y1 = sigmoid(1.5 * h1[0] - 2.0 * h1[1] + 0.25);
        assert!((net.forward_step(&x).unwrap()[0][0] - y1).abs() < 1e-15);
        let h2 = [
            sigmoid(0.1 - 0.1 + 0.5 * h1[0] - 0.6 * h1[1] + 0.05),
            sigmoid(0.3 + 0.2 + 0.7 * h1[0] + 0.8 * h1[1] - 0.05),
        ];
        let y2 = sigmoid(1.5 * h2[0] - 2.0 * h2[1] + 0.25);
        assert!((net.forward_step(&x).unwrap()[0][0] - y2).abs() < 1e-15);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let mut net = init_network(&small(3, 4, 3), 0).unwrap();
        assert!(matches!(net.forward_step(&[0.0; 2]), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_contracts() {
        let cfg = TrainConfig::default();
        let mut net = init_network(&small(3, 4, 3), 0).unwrap();
        assert!(matches!(
            net.backward_step(&[&[0.0; 3]], &cfg),
            Err(Error::Contract(_))
        ));
        net.forward_step(&[0.2, 0.3, 0.4]).unwrap();
        assert!(matches!(net.backward_step(&[], &cfg), Err(Error::Contract(_))));
        assert!(matches!(
            net.backward_step(&[&[0.0; 2]], &cfg),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dev = gradient_check(&small(3, 4, 3), 7, 1e-5).unwrap();
        assert!(dev < 1e-4, "deviation {dev}");
        let spec = NetworkSpec::modular(10, 6, &[("tense", 2), ("aspect", 3)], 5, 4);
        let dev = gradient_check(&spec, 3, 1e-5).unwrap();
        assert!(dev < 1e-4, "deviation {dev}");
    }

    #[test]
    fn recurrent_weights_receive_gradient() {
        let mut net = init_network(&small(3, 4, 3), 5).unwrap();
        net.set_context(0, &[0.3, 0.6, 0.1, 0.9]).unwrap();
        net.forward_step(&[0.1, 0.7, 0.2]).unwrap();
        net.compute_gradient(&[&[1.0, 0.0, 1.0]]).unwrap();
        let rec = net.recurrent_range(0);
        assert!(net.gradient()[rec].iter().any(|g| g.abs() > 1e-6));
    }

    #[test]
    fn linear_variant_is_exact() {
        let mut spec = small(3, 4, 3);
        spec.activation = Activation::Linear;
        let dev = gradient_check(&spec, 11, 1e-3).unwrap();
        assert!(dev < 1e-9, "deviation {dev}");
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let mut net = init_network(&small(3, 4, 3), 5).unwrap();
        let y = net.forward_step(&[0.1, 0.7, 0.2]).unwrap()[0].clone();
        let loss = net.compute_gradient(&[&y]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(net.gradient().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn repeated_updates_reduce_error() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            momentum: 0.0,
            slope_offset: 0.0,
            ..TrainConfig::default()
        };
        let mut net = init_network(&small(3, 4, 3), 2).unwrap();
        let target: &[f64] = &[0.9, 0.1, 0.8];
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            net.reset_context();
            net.forward_step(&[0.5, 0.2, 0.9]).unwrap();
            let loss = net.backward_step(&[target], &cfg).unwrap();
            assert!(loss < last, "{loss} !< {last}");
            last = loss;
        }
    }

    #[test]
    fn reset_erases_history() {
        let spec = NetworkSpec::modular(4, 5, &[("tense", 2)], 3, 3);
        let mut a = init_network(&spec, 9).unwrap();
        let mut fresh = a.clone();
        a.forward_step(&[1.0, 0.0, 1.0, 1.0]).unwrap();
        a.forward_step(&[0.0, 1.0, 1.0, 0.0]).unwrap();
        a.reset_context();
        a.reset_context();
        assert!(a.context().iter().flatten().all(|&v| v == 0.0));
        let x = [0.0; 4];
        assert_eq!(a.forward_step(&x).unwrap(), fresh.forward_step(&x).unwrap());
    }

    #[test]
    fn activations_stay_in_open_unit_interval() {
        let spec = NetworkSpec::modular(10, 30, &[("tense", 2)], 15, 15).with_init_range(5.0);
        let mut net = init_network(&spec, 4).unwrap();
        for t in 0..20 {
            let x: Vec<f64> = (0..10).map(|i| ((i + t) % 2) as f64).collect();
            let out = net.forward_step(&x).unwrap();
            assert!(out.iter().flatten().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn module_contexts_are_isolated() {
        // Changing the root module's context must not move inflection outputs.
        let spec = NetworkSpec::modular(4, 5, &[("tense", 2)], 3, 3);
        let net = init_network(&spec, 9).unwrap();
        let x = [1.0, 0.0, 1.0, 0.0];
        let mut a = StepState::zeros(&spec);
        let mut b = StepState::zeros(&spec);
        net.compute(&x, &[vec![0.0; 3], vec![0.2; 3]], &mut a);
        net.compute(&x, &[vec![0.9; 3], vec![0.2; 3]], &mut b);
        assert_eq!(a.outputs[2], b.outputs[2]);
        assert_eq!(a.hidden[1], b.hidden[1]);
        assert_ne!(a.outputs[1], b.outputs[1]);
    }

    #[test]
    fn infer_matches_stateful_forward() {
        let spec = NetworkSpec::modular(4, 5, &[("tense", 2)], 3, 3);
        let mut net = init_network(&spec, 9).unwrap();
        let word = vec![vec![0.0; 4], vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 1.0, 1.0]];
        let s = net.infer(&word).unwrap();
        net.reset_context();
        for x in &word {
            net.forward_step(x).unwrap();
        }
        assert_eq!(&s, net.last_state().unwrap());
    }
}
