//! Deterministic simulation of the two decentralized discrepancy protocols.
//!
//! In case 1 the learner ships the reference sample to every source, each
//! source runs the discrepancy estimator locally and returns one number.
//! In case 2 the reference never leaves the learner: the learner minimizes
//! the flipped-label least-squares relaxation by gradient descent, asking
//! each source for the gradient of its own term on a minibatch, then asks for
//! the source's 0/1 error count under the final candidate.
//!
//! Byte accounting is 8 bytes per transmitted real and nothing else.

use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SourcePool};
use crate::discrepancy::{
    combined_risk, empirical_discrepancy, flipped_errors, DiscrepancyEstimate, DEFAULT_RELAX_RIDGE,
};
use crate::error::{Error, Result};
use crate::linear::{LinearPredictor, TrainConfig};
use crate::rng;

pub const BYTES_PER_REAL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeId {
    Learner,
    Source(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    ReferenceBroadcast,
    DiscrepancyResult,
    ModelQuery,
    GradientReply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
    pub payload_size: usize,
    pub round: usize,
    /// Transmitted reals. Reference broadcasts carry no copy here, only their size.
    pub payload: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Whether the node is assumed to run inside trusted hardware.
    pub attested: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolCase {
    LocalComputation,
    GradientQueries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub case: ProtocolCase,
    pub nodes: Vec<Node>,
    pub messages: Vec<Message>,
    pub total_bytes: usize,
    pub rounds: usize,
    pub result: Vec<DiscrepancyEstimate>,
}

impl ProtocolTrace {
    fn new(case: ProtocolCase, n_sources: usize, attested: bool) -> Self {
        let mut nodes = vec![Node {
            id: NodeId::Learner,
            attested: false,
        }];
        nodes.extend((0..n_sources).map(|i| Node {
            id: NodeId::Source(i),
            attested,
        }));
        ProtocolTrace {
            case,
            nodes,
            messages: Vec::new(),
            total_bytes: 0,
            rounds: 0,
            result: Vec::new(),
        }
    }

    fn send(&mut self, message: Message) {
        self.total_bytes += message.payload_size;
        self.rounds = self.rounds.max(message.round + 1);
        self.messages.push(message);
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }

    /// Messages sent to or from source `i`.
    pub fn messages_with(&self, i: usize) -> usize {
        let node = NodeId::Source(i);
        self.messages
            .iter()
            .filter(|m| m.from == node || m.to == node)
            .count()
    }

    /// One JSON object per message, newline separated.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for m in &self.messages {
            serde_json::to_writer(&mut out, m)?;
            out.write_all(b"\n").map_err(|source| Error::Io {
                path: "<trace>".into(),
                source,
            })?;
        }
        Ok(())
    }
}

fn source_id(data: &Dataset, i: usize) -> String {
    data.source_id()
        .map(str::to_owned)
        .unwrap_or_else(|| format!("source_{i}"))
}

/// Case 1: broadcast the reference, estimate locally, collect one real per source.
pub fn run_case1(pool: &SourcePool, relax_config: &TrainConfig) -> Result<ProtocolTrace> {
    let n = pool.n_sources();
    let reference = pool.reference();
    let reference_reals = reference.n_samples() * (reference.n_features() + 1);
    let mut trace = ProtocolTrace::new(ProtocolCase::LocalComputation, n, true);

    for i in 0..n {
        trace.send(Message {
            from: NodeId::Learner,
            to: NodeId::Source(i),
            kind: MessageKind::ReferenceBroadcast,
            payload_size: BYTES_PER_REAL * reference_reals,
            round: 0,
            payload: Vec::new(),
        });
    }
    for (i, source) in pool.sources().iter().enumerate() {
        let mut estimate = empirical_discrepancy(source, reference, relax_config)?;
        estimate.source_id = source_id(source, i);
        trace.send(Message {
            from: NodeId::Source(i),
            to: NodeId::Learner,
            kind: MessageKind::DiscrepancyResult,
            payload_size: BYTES_PER_REAL,
            round: 1,
            payload: vec![estimate.value],
        });
        trace.result.push(estimate);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case2Config {
    pub rounds: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_ridge() -> f64 {
    DEFAULT_RELAX_RIDGE
}

impl Case2Config {
    pub fn new(rounds: usize, batch_size: usize, step_size: f64, seed: u64) -> Self {
        Case2Config {
            rounds,
            batch_size,
            step_size,
            seed,
            ridge: DEFAULT_RELAX_RIDGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "rounds and batch_size must be at least 1".into(),
            ));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid ridge {}", self.ridge)));
        }
        Ok(())
    }
}

/// Adds the gradient of `weight * sum (w.x + b - target)^2` over `rows` to `grad`.
fn accumulate_squared_gradient(
    data: &Dataset,
    rows: &[usize],
    weight: f64,
    flip: bool,
    params: &[f64],
    grad: &mut [f64],
) {
    let d = params.len() - 1;
    for &r in rows {
        let x = data.row(r);
        let label = data.labels()[r];
        let target = if flip { label.flipped() } else { label }.sign();
        let z = params[d] + x.iter().zip(&params[..d]).map(|(a, b)| a * b).sum::<f64>();
        let c = 2.0 * weight * (z - target);
        for (g, v) in grad[..d].iter_mut().zip(x.iter()) {
            *g += c * v;
        }
        grad[d] += c;
    }
}

/// Case 2: learner-driven gradient queries; the reference stays with the learner.
pub fn run_case2(pool: &SourcePool, config: &Case2Config) -> Result<ProtocolTrace> {
    config.validate()?;
    let n = pool.n_sources();
    let reference = pool.reference();
    let d = pool.n_features();
    let m_t = reference.n_samples();
    let model_bytes = BYTES_PER_REAL * (d + 1);
    let all_reference: Vec<usize> = (0..m_t).collect();
    let mut trace = ProtocolTrace::new(ProtocolCase::GradientQueries, n, false);

    let mut params = vec![vec![0.0; d + 1]; n];
    let mut samplers: Vec<_> = (0..n)
        .map(|i| rng::seeded(rng::derive_seed(config.seed, i as u64)))
        .collect();

    for round in 0..config.rounds {
        for (i, source) in pool.sources().iter().enumerate() {
            let theta = &mut params[i];
            trace.send(Message {
                from: NodeId::Learner,
                to: NodeId::Source(i),
                kind: MessageKind::ModelQuery,
                payload_size: model_bytes,
                round,
                payload: theta.clone(),
            });

            // Source side.
            let m = source.n_samples();
            let batch: Vec<usize> = if config.batch_size >= m {
                (0..m).collect()
            } else {
                index::sample(&mut samplers[i], m, config.batch_size).into_vec()
            };
            let mut reply = vec![0.0; d + 1];
            accumulate_squared_gradient(source, &batch, 1.0 / batch.len() as f64, true, theta, &mut reply);
            if reply.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    source_index: i,
                    round,
                });
            }
            trace.send(Message {
                from: NodeId::Source(i),
                to: NodeId::Learner,
                kind: MessageKind::GradientReply,
                payload_size: model_bytes,
                round,
                payload: reply.clone(),
            });

            // Learner side.
            let mut grad = reply;
            accumulate_squared_gradient(reference, &all_reference, 1.0 / m_t as f64, false, theta, &mut grad);
            for (g, w) in grad[..d].iter_mut().zip(&theta[..d]) {
                *g += config.ridge * w;
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= config.step_size * g;
            }
            if theta.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    source_index: i,
                    round,
                });
            }
        }
    }

    let last = config.rounds;
    for (i, source) in pool.sources().iter().enumerate() {
        let candidate = LinearPredictor::from_params(&params[i]);
        trace.send(Message {
            from: NodeId::Learner,
            to: NodeId::Source(i),
            kind: MessageKind::ModelQuery,
            payload_size: model_bytes,
            round: last,
            payload: params[i].clone(),
        });
        let errors = flipped_errors(&candidate, source)?;
        trace.send(Message {
            from: NodeId::Source(i),
            to: NodeId::Learner,
            kind: MessageKind::GradientReply,
            payload_size: 2 * BYTES_PER_REAL,
            round: last,
            payload: vec![errors as f64, source.n_samples() as f64],
        });
        let risk = combined_risk(
            errors,
            source.n_samples(),
            candidate.count_errors(reference)?,
            m_t,
        );
        trace
            .result
            .push(DiscrepancyEstimate::from_risk(risk, source_id(source, i)));
    }
    Ok(trace)
}

/// Recompute the discrepancy values from the messages alone, plus the
/// learner's own reference sample for case 2.
pub fn replay(trace: &ProtocolTrace, reference: &Dataset) -> Result<Vec<f64>> {
    let n = trace.nodes.len().saturating_sub(1);
    let mut values = vec![None; n];
    match trace.case {
        ProtocolCase::LocalComputation => {
            for m in &trace.messages {
                if let (MessageKind::DiscrepancyResult, NodeId::Source(i)) = (m.kind, m.from) {
                    values[i] = m.payload.first().copied();
                }
            }
        }
        ProtocolCase::GradientQueries => {
            let final_round = trace.rounds.saturating_sub(1);
            let mut candidates: Vec<Option<LinearPredictor>> = vec![None; n];
            for m in &trace.messages {
                if m.round != final_round {
                    continue;
                }
                match (m.kind, m.from, m.to) {
                    (MessageKind::ModelQuery, NodeId::Learner, NodeId::Source(i)) => {
                        candidates[i] = Some(LinearPredictor::from_params(&m.payload));
                    }
                    (MessageKind::GradientReply, NodeId::Source(i), NodeId::Learner) => {
                        let candidate = candidates[i].as_ref().ok_or_else(|| {
                            Error::InvalidArgument(format!("reply from source {i} before its query"))
                        })?;
                        let [errors, m_s] = m.payload[..] else {
                            return Err(Error::InvalidArgument(format!(
                                "malformed risk reply from source {i}"
                            )));
                        };
                        let risk = combined_risk(
                            errors as usize,
                            m_s as usize,
                            candidate.count_errors(reference)?,
                            reference.n_samples(),
                        );
                        values[i] = Some((1.0 - risk).clamp(0.0, 1.0));
                    }
                    _ => {}
                }
            }
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::InvalidArgument(format!("no result for source {i}"))))
        .collect()
}
