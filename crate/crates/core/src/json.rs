//! JSON documents for instances and policies.
//!
//! Instance document:
//!
//! ```json
//! {"T": 3, "d_x": 1, "d_u": 1,
//!  "A": [[0.5]], "B": [[[1.0]], [[1.0]], [[-1.0]]], "w": [1.0],
//!  "cost": {"kind": "quadratic_tracking", "params": {"Q": [[1.0]], "R": [[1.0]]}}}
//! ```
//!
//! `A` and `B` are either one matrix shared by every step or a list of `T`
//! matrices; `w` is one vector or a list of `T` vectors. Matrices are
//! row-major nested arrays. Cost `params` is one object or a list of `T`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cost::{CostFn, LiteralSign, PenaltyShape, QuadraticCost, SatCost, SeparationCost};
use crate::error::{LtvError, Result};
use crate::instance::{Interval, LtvInstance};
use crate::linalg::{matrix_from_rows, matrix_to_rows, Matrix, Vector};
use crate::policy::{PolicyKind, PolicyParam};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSeq {
    Shared(Rows),
    PerStep(Vec<Rows>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSeq {
    Shared(Vec<f64>),
    PerStep(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticParams {
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Rows>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ref: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_ref: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeparationParams {
    FeedbackQuarter,
    InputTracking { target: f64 },
    TrajectoryTracking { u_ref: f64, x_ref: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisyGainParams {
    pub f: PenaltyShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralTag {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatParams {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal: Option<LiteralTag>,
}

/// Parameters for one step; the variant is chosen by the document's `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostParams {
    Quadratic(QuadraticParams),
    Separation(SeparationParams),
    NoisyGain(NoisyGainParams),
    Sat(SatParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostDoc {
    pub kind: String,
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub d_x: usize,
    pub d_u: usize,
    #[serde(rename = "A")]
    pub a: MatrixSeq,
    #[serde(rename = "B")]
    pub b: MatrixSeq,
    pub w: VectorSeq,
    pub cost: CostDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub m: usize,
    pub blocks: Vec<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<PolicyKind>,
}

fn doc_err(msg: impl Into<String>) -> LtvError {
    LtvError::Document(msg.into())
}

fn to_matrix(rows: &Rows, what: &str) -> Result<Matrix> {
    matrix_from_rows(rows).ok_or_else(|| doc_err(format!("{what}: ragged rows")))
}

fn expand_matrices(seq: &MatrixSeq, horizon: usize, shape: (usize, usize), what: &str) -> Result<Vec<Matrix>> {
    let mats = match seq {
        MatrixSeq::Shared(rows) => vec![to_matrix(rows, what)?; horizon],
        MatrixSeq::PerStep(list) => {
            if list.len() != horizon {
                return Err(doc_err(format!("{what} lists {} matrices for T = {horizon}", list.len())));
            }
            list.iter().map(|r| to_matrix(r, what)).collect::<Result<Vec<_>>>()?
        }
    };
    if let Some((i, m)) = mats.iter().enumerate().find(|(_, m)| m.shape() != shape) {
        // An empty row list parses as 0x0; report it with the step it came from.
        return Err(LtvError::Dimension {
            t: i + 1,
            what: if what == "A" { "A_t" } else { "B_t" },
            expected: format!("{}x{}", shape.0, shape.1),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(mats)
}

fn expand_vectors(seq: &VectorSeq, horizon: usize, dim: usize) -> Result<Vec<Vector>> {
    let vs: Vec<Vector> = match seq {
        VectorSeq::Shared(v) => vec![Vector::from_vec(v.clone()); horizon],
        VectorSeq::PerStep(list) => {
            if list.len() != horizon {
                return Err(doc_err(format!("w lists {} vectors for T = {horizon}", list.len())));
            }
            list.iter().map(|v| Vector::from_vec(v.clone())).collect()
        }
    };
    if let Some((i, v)) = vs.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(LtvError::Dimension { t: i + 1, what: "w_t", expected: format!("{dim}x1"), found: format!("{}x1", v.len()) });
    }
    Ok(vs)
}

fn parse_cost(kind: &str, value: &serde_json::Value, d_x: usize, d_u: usize) -> Result<CostFn> {
    match kind {
        "quadratic_tracking" => {
            let p: QuadraticParams = serde_json::from_value(value.clone())?;
            let q = match &p.q {
                Some(rows) => to_matrix(rows, "Q")?,
                None => Matrix::identity(d_x, d_x),
            };
            let r = match &p.r {
                Some(rows) => to_matrix(rows, "R")?,
                None => Matrix::identity(d_u, d_u),
            };
            Ok(CostFn::quadratic(QuadraticCost {
                q,
                r,
                x_ref: p.x_ref.map(Vector::from_vec),
                u_ref: p.u_ref.map(Vector::from_vec),
            }))
        }
        "separation" => {
            let p: SeparationParams = serde_json::from_value(value.clone())?;
            Ok(CostFn::Separation(match p {
                SeparationParams::FeedbackQuarter => SeparationCost::FeedbackQuarter,
                SeparationParams::InputTracking { target } => SeparationCost::InputTracking { target },
                SeparationParams::TrajectoryTracking { u_ref, x_ref } => SeparationCost::TrajectoryTracking { u_ref, x_ref },
            }))
        }
        "noisy_gain" => {
            let p: NoisyGainParams = serde_json::from_value(value.clone())?;
            Ok(CostFn::NoisyGain(p.f))
        }
        "sat" => {
            let p: SatParams = serde_json::from_value(value.clone())?;
            if !p.scale.is_finite() || p.scale < 0.0 {
                return Err(doc_err("sat scale must be finite and non-negative"));
            }
            Ok(CostFn::Sat(SatCost {
                scale: p.scale,
                literal: p.literal.map(|l| match l {
                    LiteralTag::Positive => LiteralSign::Positive,
                    LiteralTag::Negative => LiteralSign::Negative,
                }),
            }))
        }
        other => Err(doc_err(format!("unknown cost kind {other:?}"))),
    }
}

impl InstanceDoc {
    pub fn into_instance(self) -> Result<LtvInstance> {
        let (horizon, d_x, d_u) = (self.horizon, self.d_x, self.d_u);
        if horizon == 0 || d_x == 0 || d_u == 0 {
            return Err(LtvError::InvalidParameter("T, d_x and d_u must all be positive".into()));
        }
        // Guard against documents claiming a huge horizon with a shared matrix.
        if horizon.saturating_mul(d_x.saturating_mul(d_x.max(d_u))) > 1 << 25 {
            return Err(LtvError::InvalidParameter(format!("instance of size T={horizon}, d_x={d_x}, d_u={d_u} is too large")));
        }
        let a = expand_matrices(&self.a, horizon, (d_x, d_x), "A")?;
        let b = expand_matrices(&self.b, horizon, (d_x, d_u), "B")?;
        let w = expand_vectors(&self.w, horizon, d_x)?;
        let costs = match &self.cost.params {
            serde_json::Value::Array(list) => {
                if list.len() != horizon {
                    return Err(doc_err(format!("cost lists {} parameter sets for T = {horizon}", list.len())));
                }
                list.iter().map(|v| parse_cost(&self.cost.kind, v, d_x, d_u)).collect::<Result<Vec<_>>>()?
            }
            v => vec![parse_cost(&self.cost.kind, v, d_x, d_u)?; horizon],
        };
        let mut inst = LtvInstance::new(a, b, w, costs)?;
        if let Some(x1) = self.x1 {
            inst = inst.with_initial_state(Vector::from_vec(x1))?;
        }
        let segments = self.segments.iter().map(|s| Interval::new(s.start, s.end)).collect::<Result<Vec<_>>>()?;
        inst.with_segments(segments)
    }

    pub fn from_instance(inst: &LtvInstance) -> Result<Self> {
        let first_kind = inst.cost(1).kind();
        let mut params = Vec::with_capacity(inst.horizon());
        for (i, c) in inst.costs().iter().enumerate() {
            if c.kind() != first_kind {
                return Err(doc_err(format!("cost kind changes at t={} ({} vs {first_kind})", i + 1, c.kind())));
            }
            params.push(cost_params(c).ok_or_else(|| doc_err("custom costs cannot be serialized"))?);
        }
        let params = if params.windows(2).all(|p| p[0] == p[1]) {
            serde_json::to_value(&params[0])?
        } else {
            serde_json::to_value(&params)?
        };
        let x1 = inst.initial_state();
        Ok(InstanceDoc {
            horizon: inst.horizon(),
            d_x: inst.state_dim(),
            d_u: inst.input_dim(),
            a: collapse_matrices(inst.a_seq()),
            b: collapse_matrices(inst.b_seq()),
            w: collapse_vectors(inst.w_seq()),
            cost: CostDoc { kind: first_kind.to_string(), params },
            x1: if x1.iter().all(|v| *v == 0.0) { None } else { Some(x1.iter().cloned().collect()) },
            segments: inst.segments().to_vec(),
        })
    }
}

fn collapse_matrices(ms: &[Matrix]) -> MatrixSeq {
    if ms.windows(2).all(|p| p[0] == p[1]) {
        MatrixSeq::Shared(matrix_to_rows(&ms[0]))
    } else {
        MatrixSeq::PerStep(ms.iter().map(matrix_to_rows).collect())
    }
}

fn collapse_vectors(vs: &[Vector]) -> VectorSeq {
    if vs.windows(2).all(|p| p[0] == p[1]) {
        VectorSeq::Shared(vs[0].iter().cloned().collect())
    } else {
        VectorSeq::PerStep(vs.iter().map(|v| v.iter().cloned().collect()).collect())
    }
}

fn cost_params(c: &CostFn) -> Option<CostParams> {
    Some(match c {
        CostFn::Quadratic(q) => CostParams::Quadratic(QuadraticParams {
            q: Some(matrix_to_rows(&q.q)),
            r: Some(matrix_to_rows(&q.r)),
            x_ref: q.x_ref.as_ref().map(|v| v.iter().cloned().collect()),
            u_ref: q.u_ref.as_ref().map(|v| v.iter().cloned().collect()),
        }),
        CostFn::Separation(s) => CostParams::Separation(match *s {
            SeparationCost::FeedbackQuarter => SeparationParams::FeedbackQuarter,
            SeparationCost::InputTracking { target } => SeparationParams::InputTracking { target },
            SeparationCost::TrajectoryTracking { u_ref, x_ref } => SeparationParams::TrajectoryTracking { u_ref, x_ref },
        }),
        CostFn::NoisyGain(f) => CostParams::NoisyGain(NoisyGainParams { f: *f }),
        CostFn::Sat(s) => CostParams::Sat(SatParams {
            scale: s.scale,
            literal: s.literal.map(|l| match l {
                LiteralSign::Positive => LiteralTag::Positive,
                LiteralSign::Negative => LiteralTag::Negative,
            }),
        }),
        CostFn::Custom(_) => return None,
    })
}

/// Parses and validates an instance document.
pub fn instance_from_str(s: &str) -> Result<LtvInstance> {
    let doc: InstanceDoc = serde_json::from_str(s)?;
    doc.into_instance()
}

pub fn instance_to_string(inst: &LtvInstance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceDoc::from_instance(inst)?)?)
}

impl PolicyDoc {
    pub fn into_policy(self) -> Result<(PolicyParam, Option<PolicyKind>)> {
        if self.m == 0 {
            return Err(LtvError::InvalidParameter("policy memory m must be at least 1".into()));
        }
        if self.blocks.len() != self.m {
            return Err(doc_err(format!("m = {} but {} blocks given", self.m, self.blocks.len())));
        }
        let blocks = self.blocks.iter().map(|r| to_matrix(r, "policy block")).collect::<Result<Vec<_>>>()?;
        if blocks[0].is_empty() {
            return Err(doc_err("policy blocks must be non-empty"));
        }
        Ok((PolicyParam::new(blocks)?, self.kind))
    }

    pub fn from_policy(params: &PolicyParam, kind: Option<PolicyKind>) -> Self {
        PolicyDoc { m: params.memory(), blocks: params.blocks().iter().map(matrix_to_rows).collect(), kind }
    }
}

pub fn policy_from_str(s: &str) -> Result<(PolicyParam, Option<PolicyKind>)> {
    let doc: PolicyDoc = serde_json::from_str(s)?;
    doc.into_policy()
}

pub fn policy_to_string(params: &PolicyParam, kind: Option<PolicyKind>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PolicyDoc::from_policy(params, kind))?)
}

/// Wraps an arbitrary user cost so it can sit in an instance; such instances
/// are not serializable.
pub fn custom_cost(c: impl crate::cost::CustomCost + 'static) -> CostFn {
    CostFn::Custom(Arc::new(c))
}
