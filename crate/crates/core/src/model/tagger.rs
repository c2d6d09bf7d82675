use std::collections::BTreeMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::lstm::{self, sigmoid, LstmParams, Tape};
use super::vocab::{random_embeddings, Vocabulary};
use super::{ContextFeed, ContextState, ModelConfig, ModelError, Prediction, Result};
use crate::corpus::{Agent, Dialogue, DialogueAct, Labeling, Turn};
use crate::schema::{act_role, LabelSpace};

/// Every trainable tensor. The heads are stacked: rows `j·F..(j+1)·F` of
/// `w1` and row `j` of `w2` belong to act `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    /// `V × E`
    pub embedding: Array2<f64>,
    pub utt_fwd: LstmParams,
    pub utt_bwd: LstmParams,
    pub dialogue: LstmParams,
    /// `M·F × D`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `M × F`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn xavier<R: Rng>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

impl Params {
    pub const NAMES: [&'static str; 11] = [
        "embedding",
        "utt_fwd.w",
        "utt_fwd.b",
        "utt_bwd.w",
        "utt_bwd.b",
        "dialogue.w",
        "dialogue.b",
        "head.w1",
        "head.b1",
        "head.w2",
        "head.b2",
    ];

    /// Named tensors in [`Params::NAMES`] order with their shapes.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        fn m(a: &Array2<f64>) -> (Vec<usize>, &[f64]) {
            (a.shape().to_vec(), a.as_slice().expect("standard layout"))
        }
        fn v(a: &Array1<f64>) -> (Vec<usize>, &[f64]) {
            (vec![a.len()], a.as_slice().expect("standard layout"))
        }
        let parts = [
            m(&self.embedding),
            m(&self.utt_fwd.w),
            v(&self.utt_fwd.b),
            m(&self.utt_bwd.w),
            v(&self.utt_bwd.b),
            m(&self.dialogue.w),
            v(&self.dialogue.b),
            m(&self.w1),
            v(&self.b1),
            m(&self.w2),
            v(&self.b2),
        ];
        Self::NAMES.into_iter().zip(parts).map(|(n, (shape, data))| (n, shape, data)).collect()
    }

    /// Mutable value slices in [`Params::NAMES`] order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let sl = "standard layout";
        vec![
            self.embedding.as_slice_mut().expect(sl),
            self.utt_fwd.w.as_slice_mut().expect(sl),
            self.utt_fwd.b.as_slice_mut().expect(sl),
            self.utt_bwd.w.as_slice_mut().expect(sl),
            self.utt_bwd.b.as_slice_mut().expect(sl),
            self.dialogue.w.as_slice_mut().expect(sl),
            self.dialogue.b.as_slice_mut().expect(sl),
            self.w1.as_slice_mut().expect(sl),
            self.b1.as_slice_mut().expect(sl),
            self.w2.as_slice_mut().expect(sl),
            self.b2.as_slice_mut().expect(sl),
        ]
    }

    pub fn zeros_like(&self) -> Params {
        let l = |p: &LstmParams| LstmParams::zeros(p.input(), p.hidden());
        Params {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            utt_fwd: l(&self.utt_fwd),
            utt_bwd: l(&self.utt_bwd),
            dialogue: l(&self.dialogue),
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.len()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.len()),
        }
    }

    /// Like [`Params::zeros_like`] but with an empty embedding, for partial
    /// gradients whose embedding rows are kept sparse.
    fn zeros_without_embedding(&self) -> Params {
        let mut z = self.zeros_like();
        z.embedding = Array2::zeros((0, self.embedding.ncols()));
        z
    }

    pub fn n_values(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    fn add_dense(&mut self, other: &Params) {
        for (a, b) in [
            (&mut self.utt_fwd, &other.utt_fwd),
            (&mut self.utt_bwd, &other.utt_bwd),
            (&mut self.dialogue, &other.dialogue),
        ] {
            a.w += &b.w;
            a.b += &b.b;
        }
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.w2 += &other.w2;
        self.b2 += &other.b2;
    }
}

/// A dialogue mapped to vocabulary indices with many-hot targets on the
/// labeled turns.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDialogue {
    pub id: String,
    pub ids: Vec<Vec<usize>>,
    pub agents: Vec<Agent>,
    pub targets: Vec<Option<Vec<f64>>>,
}

impl EncodedDialogue {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_labeled(&self) -> usize {
        self.targets.iter().filter(|t| t.is_some()).count()
    }
}

#[derive(Clone, Debug)]
pub struct Tagger {
    pub config: ModelConfig,
    pub labels: LabelSpace,
    pub vocab: Vocabulary,
    pub params: Params,
}

struct Forward {
    /// `N × M` logits
    logits: Array2<f64>,
    /// `N × D` head inputs
    x: Array2<f64>,
    /// `N × M·F` post-ReLU head activations
    h1: Array2<f64>,
    dialogue: Option<Tape>,
    utterances: Vec<(Tape, Tape)>,
}

const GRAD_CHUNK: usize = 4;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tagger {
    /// A freshly initialized model with random embeddings.
    pub fn new(config: ModelConfig, labels: LabelSpace, vocab: Vocabulary) -> Result<Self> {
        Self::build(config, labels, vocab, None)
    }

    /// A freshly initialized model using the given `V × E` embedding matrix.
    pub fn with_embeddings(
        config: ModelConfig,
        labels: LabelSpace,
        vocab: Vocabulary,
        embedding: Array2<f64>,
    ) -> Result<Self> {
        Self::build(config, labels, vocab, Some(embedding))
    }

    fn build(config: ModelConfig, labels: LabelSpace, vocab: Vocabulary, embedding: Option<Array2<f64>>) -> Result<Self> {
        config.validate()?;
        if labels.len() != config.n_acts {
            return Err(ModelError::InvalidConfig(format!(
                "n_acts is {} but the label space has {} acts",
                config.n_acts,
                labels.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embedding = match embedding {
            Some(e) if e.dim() == (vocab.len(), config.embedding_dim) => e,
            Some(e) => {
                return Err(ModelError::InvalidConfig(format!(
                    "embedding matrix is {:?}, expected {:?}",
                    e.dim(),
                    (vocab.len(), config.embedding_dim)
                )))
            }
            None => random_embeddings(&vocab, config.embedding_dim, &mut rng),
        };
        let (uh, dh, f, m) = (config.utterance_hidden, config.dialogue_hidden, config.head_hidden, config.n_acts);
        let d = config.head_input_dim();
        let params = Params {
            embedding,
            utt_fwd: LstmParams::new(config.embedding_dim, uh, &mut rng),
            utt_bwd: LstmParams::new(config.embedding_dim, uh, &mut rng),
            dialogue: LstmParams::new(2 * uh, dh, &mut rng),
            w1: xavier(m * f, d, d, f, &mut rng),
            b1: Array1::zeros(m * f),
            w2: xavier(m, f, f, 1, &mut rng),
            b2: Array1::zeros(m),
        };
        assert_eq!(params.w1.ncols(), 2 * uh + dh + usize::from(config.use_agent) + config.past_dim());
        Ok(Tagger {
            config,
            labels,
            vocab,
            params,
        })
    }

    pub fn many_hot(&self, acts: &[DialogueAct]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.labels.len()];
        for a in acts {
            let j = self.labels.index_of(&a.name).ok_or_else(|| ModelError::UnknownAct(a.name.clone()))?;
            v[j] = 1.0;
        }
        Ok(v)
    }

    /// Maps tokens to indices; turns on a side covered by `labeled` get targets.
    pub fn encode_dialogue(&self, d: &Dialogue, labeled: Labeling) -> Result<EncodedDialogue> {
        self.encode_inner(d, labeled, true)
    }

    fn encode_inner(&self, d: &Dialogue, labeled: Labeling, strict: bool) -> Result<EncodedDialogue> {
        let mut targets = Vec::with_capacity(d.turns.len());
        for t in &d.turns {
            targets.push(match (labeled.covers(t.agent), strict) {
                (false, _) => None,
                (true, true) => Some(self.many_hot(&t.acts)?),
                (true, false) => {
                    let mut v = vec![0.0; self.labels.len()];
                    for j in t.acts.iter().filter_map(|a| self.labels.index_of(&a.name)) {
                        v[j] = 1.0;
                    }
                    Some(v)
                }
            });
        }
        Ok(EncodedDialogue {
            id: d.id.clone(),
            ids: d.turns.iter().map(|t| self.vocab.encode(&t.tokens)).collect(),
            agents: d.turns.iter().map(|t| t.agent).collect(),
            targets,
        })
    }

    fn embed(&self, ids: &[usize]) -> Array2<f64> {
        self.params.embedding.select(Axis(0), ids)
    }

    /// `z_i` for an index sequence, one sequence at a time.
    pub fn encode_ids(&self, ids: &[usize]) -> Array1<f64> {
        self.encode_with_tapes(ids).0
    }

    pub fn encode_utterance(&self, tokens: &[String]) -> Vec<f64> {
        self.encode_ids(&self.vocab.encode(tokens)).to_vec()
    }

    fn encode_with_tapes(&self, ids: &[usize]) -> (Array1<f64>, Tape, Tape) {
        let uh = self.config.utterance_hidden;
        let xs = self.embed(ids);
        let (hf, tf) = lstm::forward(&self.params.utt_fwd, xs.view());
        let mut rev = xs;
        rev.invert_axis(Axis(0));
        let rev = rev.as_standard_layout().to_owned();
        let (hb, tb) = lstm::forward(&self.params.utt_bwd, rev.view());
        let t = ids.len() - 1;
        let mut z = Array1::zeros(2 * uh);
        z.slice_mut(s![..uh]).assign(&hf.row(t));
        z.slice_mut(s![uh..]).assign(&hb.row(t));
        (z, tf, tb)
    }

    /// Encodes sequences right-padded to a common length; positions at or
    /// past `lengths[b]` are masked out. `ids[b].len()` must be equal for all `b`.
    pub fn encode_padded(&self, ids: &[Vec<usize>], lengths: &[usize]) -> Array2<f64> {
        let uh = self.config.utterance_hidden;
        let max_len = ids.first().map_or(0, Vec::len);
        let flat: Vec<usize> = ids.iter().flatten().copied().collect();
        let xs = self.embed(&flat);
        let hf = lstm::forward_masked_final(&self.params.utt_fwd, xs.view(), lengths, max_len, false);
        let hb = lstm::forward_masked_final(&self.params.utt_bwd, xs.view(), lengths, max_len, true);
        let mut z = Array2::zeros((ids.len(), 2 * uh));
        z.slice_mut(s![.., ..uh]).assign(&hf);
        z.slice_mut(s![.., uh..]).assign(&hb);
        z
    }

    /// Batched, masked encoding of variable-length sequences (`B × 2H`).
    pub fn encode_batch(&self, seqs: &[Vec<usize>]) -> Array2<f64> {
        let max_len = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let lengths: Vec<usize> = seqs.iter().map(Vec::len).collect();
        let padded: Vec<Vec<usize>> = seqs
            .iter()
            .map(|s| {
                let mut p = s.clone();
                p.resize(max_len, super::PAD);
                p
            })
            .collect();
        self.encode_padded(&padded, &lengths)
    }

    fn past_window(&self, past: &[Vec<f64>]) -> Vec<f64> {
        let (k, m) = (self.config.past_act_window, self.config.n_acts);
        let mut p = vec![0.0; k * m];
        for (slot, d) in (0..k).rev().zip(past.iter().rev()) {
            p[slot * m..(slot + 1) * m].copy_from_slice(d);
        }
        p
    }

    /// Context for a turn by `agent` after `history` (turns with their act vectors).
    pub fn encode_context(&self, history: &[(Turn, Vec<f64>)], agent: Agent) -> ContextState {
        let dh = self.config.dialogue_hidden;
        let e = if history.is_empty() {
            vec![0.0; dh]
        } else {
            let zs: Vec<Vec<usize>> = history.iter().map(|(t, _)| self.vocab.encode(&t.tokens)).collect();
            let z = self.encode_batch(&zs);
            let (hs, _) = lstm::forward(&self.params.dialogue, z.view());
            hs.row(hs.nrows() - 1).to_vec()
        };
        let past: Vec<Vec<f64>> = history.iter().map(|(_, d)| d.clone()).collect();
        ContextState {
            e,
            g: if agent == Agent::System { 1.0 } else { 0.0 },
            p: self.past_window(&past),
        }
    }

    fn head_input(&self, z: &[f64], e: &[f64], g: f64, p: &[f64]) -> Array1<f64> {
        let mut x = Vec::with_capacity(self.config.head_input_dim());
        x.extend_from_slice(z);
        x.extend_from_slice(e);
        if self.config.use_agent {
            x.push(g);
        }
        if self.config.use_past_acts {
            x.extend_from_slice(p);
        }
        Array1::from(x)
    }

    /// Post-ReLU hidden activations and logits of every head.
    fn heads(&self, x: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let f = self.config.head_hidden;
        let h1 = (self.params.w1.dot(x) + &self.params.b1).mapv(|v| v.max(0.0));
        let logits = Array1::from_shape_fn(self.config.n_acts, |j| {
            self.params.w2.row(j).dot(&h1.slice(s![j * f..(j + 1) * f])) + self.params.b2[j]
        });
        (h1, logits)
    }

    /// Acts reserved for the other agent are never emitted.
    fn allowed(&self, j: usize, agent: Agent) -> bool {
        act_role(self.labels.name(j)).is_none_or(|r| r == agent)
    }

    fn prediction(&self, logits: ndarray::ArrayView1<f64>, agent: Agent) -> Prediction {
        let scores: Vec<f64> = logits.iter().map(|&s| sigmoid(s)).collect();
        let acts = scores
            .iter()
            .enumerate()
            .filter(|&(j, &y)| y >= self.config.decision_threshold && self.allowed(j, agent))
            .map(|(j, _)| self.labels.name(j).to_string())
            .collect();
        Prediction { scores, acts }
    }

    fn threshold(&self, logits: ndarray::ArrayView1<f64>, agent: Agent) -> Vec<f64> {
        logits
            .iter()
            .enumerate()
            .map(|(j, &s)| f64::from(u8::from(sigmoid(s) >= self.config.decision_threshold && self.allowed(j, agent))))
            .collect()
    }

    pub fn predict_turn(&self, turn: &Turn, ctx: &ContextState) -> Prediction {
        let z = self.encode_utterance(&turn.tokens);
        let x = self.head_input(&z, &ctx.e, ctx.g, &ctx.p);
        let (_, logits) = self.heads(&x);
        self.prediction(logits.view(), turn.agent)
    }

    fn run(&self, d: &EncodedDialogue, feed: ContextFeed, tape: bool) -> Forward {
        let n = d.len();
        let (uh, dh) = (self.config.utterance_hidden, self.config.dialogue_hidden);
        let mut utterances = Vec::new();
        let z = if tape {
            let mut z = Array2::zeros((n, 2 * uh));
            for (i, ids) in d.ids.iter().enumerate() {
                let (zi, tf, tb) = self.encode_with_tapes(ids);
                z.row_mut(i).assign(&zi);
                utterances.push((tf, tb));
            }
            z
        } else {
            self.encode_batch(&d.ids)
        };
        let (hd, dialogue) = if n > 1 {
            let (hs, t) = lstm::forward(&self.params.dialogue, z.slice(s![..n - 1, ..]));
            (Some(hs), Some(t))
        } else {
            (None, None)
        };
        let zero_e = vec![0.0; dh];
        let mut x = Array2::zeros((n, self.config.head_input_dim()));
        let mut h1 = Array2::zeros((n, self.config.n_acts * self.config.head_hidden));
        let mut logits = Array2::zeros((n, self.config.n_acts));
        let mut past: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let e = match (&hd, i) {
                (Some(hs), i) if i > 0 => hs.row(i - 1).to_vec(),
                _ => zero_e.clone(),
            };
            let g = if d.agents[i] == Agent::System { 1.0 } else { 0.0 };
            let p = if self.config.use_past_acts {
                let start = i.saturating_sub(self.config.past_act_window);
                self.past_window(&past[start..i])
            } else {
                Vec::new()
            };
            let zi = z.row(i).to_vec();
            let xi = self.head_input(&zi, &e, g, &p);
            let (hi, si) = self.heads(&xi);
            let di = match (&d.targets[i], feed) {
                (Some(t), ContextFeed::GoldIfPresent) => t.clone(),
                _ => self.threshold(si.view(), d.agents[i]),
            };
            past.push(di);
            x.row_mut(i).assign(&xi);
            h1.row_mut(i).assign(&hi);
            logits.row_mut(i).assign(&si);
        }
        Forward {
            logits,
            x,
            h1,
            dialogue,
            utterances,
        }
    }

    /// One prediction per turn, left to right.
    pub fn tag_encoded(&self, d: &EncodedDialogue, feed: ContextFeed) -> Vec<Prediction> {
        let f = self.run(d, feed, false);
        f.logits.rows().into_iter().zip(&d.agents).map(|(r, &a)| self.prediction(r, a)).collect()
    }

    /// Tags a dialogue; gold acts feed the past-act window on turns of a side
    /// covered by `labeled` when `feed` is [`ContextFeed::GoldIfPresent`].
    /// Gold acts outside the label space are left out of that window.
    pub fn tag_dialogue(&self, d: &Dialogue, feed: ContextFeed, labeled: Labeling) -> Result<Vec<Prediction>> {
        let labeled = if feed == ContextFeed::Predicted { Labeling::Unlabeled } else { labeled };
        Ok(self.tag_encoded(&self.encode_inner(d, labeled, false)?, feed))
    }

    fn check_targets(d: &EncodedDialogue) -> Result<()> {
        for (i, t) in d.targets.iter().enumerate() {
            if let Some(t) = t {
                if let Some((j, &v)) = t.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
                    return Err(ModelError::NonBinaryTarget {
                        dialogue: d.id.clone(),
                        turn: i,
                        act: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    fn loss_of(&self, d: &EncodedDialogue, logits: &Array2<f64>) -> f64 {
        let mut loss = 0.0;
        for (i, t) in d.targets.iter().enumerate() {
            if let Some(t) = t {
                for (j, &tj) in t.iter().enumerate() {
                    let s = logits[[i, j]];
                    loss += softplus(s) - tj * s;
                }
            }
        }
        loss
    }

    /// Summed binary cross-entropy over every labeled turn and act.
    pub fn batch_loss(&self, dialogues: &[EncodedDialogue]) -> Result<f64> {
        for d in dialogues {
            Self::check_targets(d)?;
        }
        let losses: Vec<f64> = dialogues
            .par_iter()
            .map(|d| {
                let f = self.run(d, ContextFeed::GoldIfPresent, false);
                self.loss_of(d, &f.logits)
            })
            .collect();
        Ok(losses.iter().sum())
    }

    /// Which head units are active on each labeled pass; the loss is smooth
    /// only where this pattern is locally constant.
    pub(crate) fn relu_pattern(&self, dialogues: &[EncodedDialogue]) -> Vec<bool> {
        dialogues
            .iter()
            .flat_map(|d| self.run(d, ContextFeed::GoldIfPresent, false).h1.into_iter().map(|v| v > 0.0))
            .collect()
    }

    /// Loss and its exact gradient. Partial sums are formed over fixed-size
    /// chunks and combined in order, so the result does not depend on the
    /// number of worker threads.
    pub fn batch_loss_and_grad(&self, dialogues: &[EncodedDialogue]) -> Result<(f64, Params)> {
        for d in dialogues {
            Self::check_targets(d)?;
        }
        let partials: Vec<(f64, Params, BTreeMap<usize, Array1<f64>>)> = dialogues
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut g = self.params.zeros_without_embedding();
                let mut emb = BTreeMap::new();
                let mut loss = 0.0;
                for d in chunk {
                    let f = self.run(d, ContextFeed::GoldIfPresent, true);
                    loss += self.backward(d, &f, &mut g, &mut emb);
                }
                (loss, g, emb)
            })
            .collect();
        let mut grad = self.params.zeros_like();
        let mut loss = 0.0;
        for (l, g, emb) in partials {
            loss += l;
            grad.add_dense(&g);
            for (row, v) in emb {
                let mut r = grad.embedding.row_mut(row);
                r += &v;
            }
        }
        Ok((loss, grad))
    }

    fn backward(
        &self,
        d: &EncodedDialogue,
        f: &Forward,
        grad: &mut Params,
        emb: &mut BTreeMap<usize, Array1<f64>>,
    ) -> f64 {
        let n = d.len();
        let (uh, dh, hf, m) = (
            self.config.utterance_hidden,
            self.config.dialogue_hidden,
            self.config.head_hidden,
            self.config.n_acts,
        );
        let p = &self.params;
        let mut ds = Array2::<f64>::zeros((n, m));
        for (i, t) in d.targets.iter().enumerate() {
            if let Some(t) = t {
                for j in 0..m {
                    ds[[i, j]] = sigmoid(f.logits[[i, j]]) - t[j];
                }
            }
        }
        let loss = self.loss_of(d, &f.logits);

        let mut da1 = Array2::<f64>::zeros((n, m * hf));
        for i in 0..n {
            for j in 0..m {
                let dsij = ds[[i, j]];
                if dsij == 0.0 {
                    continue;
                }
                grad.b2[j] += dsij;
                for k in 0..hf {
                    let h = f.h1[[i, j * hf + k]];
                    grad.w2[[j, k]] += dsij * h;
                    if h > 0.0 {
                        da1[[i, j * hf + k]] = dsij * p.w2[[j, k]];
                    }
                }
            }
        }
        general_mat_mul(1.0, &da1.t(), &f.x, 1.0, &mut grad.w1);
        grad.b1 += &da1.sum_axis(Axis(0));
        let dx = da1.dot(&p.w1);

        let mut dz = dx.slice(s![.., ..2 * uh]).to_owned();
        if let Some(tape) = &f.dialogue {
            let de = dx.slice(s![1.., 2 * uh..2 * uh + dh]);
            let dzs = lstm::backward(&p.dialogue, tape, de, &mut grad.dialogue);
            let mut head = dz.slice_mut(s![..n - 1, ..]);
            head += &dzs;
        }

        for (i, (tf, tb)) in f.utterances.iter().enumerate() {
            let ids = &d.ids[i];
            let t_len = ids.len();
            let mut dh_f = Array2::zeros((t_len, uh));
            dh_f.row_mut(t_len - 1).assign(&dz.slice(s![i, ..uh]));
            let dx_f = lstm::backward(&p.utt_fwd, tf, dh_f.view(), &mut grad.utt_fwd);
            let mut dh_b = Array2::zeros((t_len, uh));
            dh_b.row_mut(t_len - 1).assign(&dz.slice(s![i, uh..]));
            let dx_b = lstm::backward(&p.utt_bwd, tb, dh_b.view(), &mut grad.utt_bwd);
            for (pos, &id) in ids.iter().enumerate() {
                let row = emb.entry(id).or_insert_with(|| Array1::zeros(self.config.embedding_dim));
                *row += &dx_f.row(pos);
                *row += &dx_b.row(t_len - 1 - pos);
            }
        }
        loss
    }
}
