//! JSON formats for instances, duals and mechanisms, plus CSV rendering.
//!
//! Numbers are read either as JSON numbers (taken at their decimal text) or as exact
//! `"n/d"` strings; writers always emit exact strings.

use crate::dist::{CurveDist, DensityDist, DistError, Instance, MarginalDist};
use crate::dual::{DualSolution, FlowVar};
use crate::num::{fmt12, Q};
use crate::poset::{ItemPoset, PosetError, PosetJson};
use crate::pwl::{Pwl, PwlError};
use crate::verify::{Mechanism, StepError, StepFn};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad number {0:?}")]
    Number(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Pwl(#[from] PwlError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("{0}")]
    Shape(String),
}

/// Exact rational with a lenient reader.
#[derive(Clone, Debug, PartialEq)]
pub struct Num(pub Q);

pub fn parse_q(s: &str) -> Result<Q, IoError> {
    let bad = || IoError::Number(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = format!("{int}{frac}");
    let n = BigInt::from_str(if digits == "-" || digits.is_empty() { "x" } else { &digits }).map_err(|_| bad())?;
    let shift = exp - frac.len() as i32;
    let ten = Q::from_integer(BigInt::from(10));
    let scale = if shift >= 0 { num_traits::pow(ten, shift as usize) } else { Q::one() / num_traits::pow(ten, (-shift) as usize) };
    Ok(Q::from_integer(n) * scale)
}

pub fn q_string(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q_string(&self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let text = match &v {
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            other => return Err(serde::de::Error::custom(format!("expected number, got {other}"))),
        };
        parse_q(&text).map(Num).map_err(serde::de::Error::custom)
    }
}

fn n(x: &Q) -> Num {
    Num(x.clone())
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PieceJson {
    pub lo: Num,
    pub hi: Num,
    pub density: Num,
}

/// Either `pieces` (conditional density) or `curve` (revenue curve vertices) is set.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct MarginalJson {
    pub q: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<Vec<(Num, Num)>>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct InstanceJson {
    #[serde(flatten)]
    pub poset: PosetJson,
    #[serde(rename = "H")]
    pub h: Num,
    /// Keyed by item label.
    pub marginals: BTreeMap<String, MarginalJson>,
}

/// Breakpoints with the value at each piece start and the left limit at each piece end.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct PwlJson {
    pub xs: Vec<Num>,
    pub left: Vec<Num>,
    pub right: Vec<Num>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct FlowJson {
    pub edge: (String, String),
    pub atoms: Vec<(Num, Num)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<PwlJson>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct DualJson {
    pub lambda: BTreeMap<String, PwlJson>,
    pub flows: Vec<FlowJson>,
}

/// Allocation jumps `(value, level after the jump)` per item label.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct MechanismJson {
    pub allocation: BTreeMap<String, Vec<(Num, Num)>>,
}

pub fn pwl_to_json(p: &Pwl) -> PwlJson {
    let k = p.pieces();
    PwlJson {
        xs: p.breakpoints().iter().map(n).collect(),
        left: (0..k).map(|i| n(p.piece(i).2)).collect(),
        right: (0..k).map(|i| n(p.piece(i).3)).collect(),
    }
}

pub fn pwl_from_json(j: &PwlJson) -> Result<Pwl, IoError> {
    let un = |v: &[Num]| v.iter().map(|x| x.0.clone()).collect();
    Ok(Pwl::new(un(&j.xs), un(&j.left), un(&j.right))?)
}

fn marginal_to_json(m: &MarginalDist) -> MarginalJson {
    match m {
        MarginalDist::Density(d) => MarginalJson {
            q: n(m.q()),
            pieces: Some(d.pieces().map(|(lo, hi, den)| PieceJson { lo: n(lo), hi: n(hi), density: n(den) }).collect()),
            curve: None,
        },
        MarginalDist::Curve(c) => MarginalJson {
            q: n(m.q()),
            pieces: None,
            curve: Some(c.curve().vertices().iter().map(|(x, y)| (n(x), n(y))).collect()),
        },
    }
}

fn marginal_from_json(j: &MarginalJson, h: &Q) -> Result<MarginalDist, IoError> {
    match (&j.pieces, &j.curve) {
        (Some(ps), None) => {
            let mut xs = vec![Q::zero()];
            let mut dens = Vec::new();
            for p in ps {
                if p.lo.0 != *xs.last().unwrap() {
                    return Err(IoError::Shape(format!("piece starts at {} but previous ends at {}", p.lo.0, xs.last().unwrap())));
                }
                xs.push(p.hi.0.clone());
                dens.push(p.density.0.clone());
            }
            if xs.last() != Some(h) {
                return Err(IoError::Shape("density pieces must end at H".into()));
            }
            Ok(MarginalDist::Density(DensityDist::new(j.q.0.clone(), xs, dens)?))
        }
        (None, Some(pts)) => {
            let pts: Vec<(Q, Q)> = pts.iter().map(|(x, y)| (x.0.clone(), y.0.clone())).collect();
            let c = MarginalDist::Curve(CurveDist::new(Pwl::from_vertices(&pts)?)?);
            if c.q() != &j.q.0 {
                return Err(IoError::Shape(format!("curve starts with slope {} but q is {}", c.q(), j.q.0)));
            }
            Ok(c)
        }
        _ => Err(IoError::Shape("marginal needs exactly one of `pieces` or `curve`".into())),
    }
}

pub fn instance_to_json(inst: &Instance) -> InstanceJson {
    InstanceJson {
        poset: inst.poset.to_json(),
        h: n(&inst.h),
        marginals: inst.poset.labels().iter().cloned().zip(inst.marginals.iter().map(marginal_to_json)).collect(),
    }
}

/// Parses an instance; returns dropped-edge warnings alongside.
pub fn instance_from_json(j: &InstanceJson) -> Result<(Instance, Vec<String>), IoError> {
    let (poset, warnings) = ItemPoset::from_json(&j.poset)?;
    let mut ms = Vec::with_capacity(poset.len());
    for l in poset.labels() {
        let mj = j.marginals.get(l).ok_or_else(|| IoError::Shape(format!("no marginal for {l}")))?;
        ms.push(marginal_from_json(mj, &j.h.0)?);
    }
    if let Some(extra) = j.marginals.keys().find(|k| poset.id_of(k).is_none()) {
        return Err(IoError::UnknownItem(extra.clone()));
    }
    Ok((Instance::new(poset, j.h.0.clone(), ms)?, warnings))
}

fn id(poset: &ItemPoset, l: &str) -> Result<usize, IoError> {
    poset.id_of(l).ok_or_else(|| IoError::UnknownItem(l.to_string()))
}

pub fn dual_to_json(poset: &ItemPoset, d: &DualSolution) -> DualJson {
    DualJson {
        lambda: poset.labels().iter().cloned().zip(d.lambda.iter().map(pwl_to_json)).collect(),
        flows: d
            .flows
            .iter()
            .map(|(&(w, b), f)| FlowJson {
                edge: (poset.label(w).to_string(), poset.label(b).to_string()),
                atoms: f.atoms.iter().map(|(y, m)| (n(y), n(m))).collect(),
                density: f.density.as_ref().map(pwl_to_json),
            })
            .collect(),
    }
}

/// Missing `lambda` entries are zero on `[0, H]`.
pub fn dual_from_json(inst: &Instance, j: &DualJson) -> Result<DualSolution, IoError> {
    let mut d = DualSolution::zero(inst);
    for (l, p) in &j.lambda {
        d.lambda[id(&inst.poset, l)?] = pwl_from_json(p)?;
    }
    for f in &j.flows {
        let key = (id(&inst.poset, &f.edge.0)?, id(&inst.poset, &f.edge.1)?);
        let mut fv = FlowVar::from_atoms(f.atoms.iter().map(|(y, m)| (y.0.clone(), m.0.clone())).collect());
        fv.density = f.density.as_ref().map(pwl_from_json).transpose()?;
        d.flows.insert(key, fv);
    }
    Ok(d)
}

pub fn mechanism_to_json(poset: &ItemPoset, m: &Mechanism) -> MechanismJson {
    MechanismJson {
        allocation: poset
            .labels()
            .iter()
            .cloned()
            .zip(m.allocation.iter().map(|a| a.jumps().iter().map(|(v, l)| (n(v), n(l))).collect()))
            .collect(),
    }
}

/// Items without an entry are never allocated.
pub fn mechanism_from_json(poset: &ItemPoset, j: &MechanismJson) -> Result<Mechanism, IoError> {
    let mut alloc = vec![StepFn::zero(); poset.len()];
    for (l, jumps) in &j.allocation {
        alloc[id(poset, l)?] = StepFn::new(jumps.iter().map(|(v, a)| (v.0.clone(), a.0.clone())).collect())?;
    }
    Ok(Mechanism::new(alloc))
}

/// `x,value` rows at the breakpoints, with both one-sided values at jumps.
pub fn pwl_csv(p: &Pwl, header: (&str, &str)) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    let mut last: Option<(Q, Q)> = None;
    for k in 0..p.pieces() {
        let (x0, x1, y0, y1) = p.piece(k);
        for (x, y) in [(x0, y0), (x1, y1)] {
            if last.as_ref() != Some(&(x.clone(), y.clone())) {
                out.push_str(&format!("{},{}\n", fmt12(x), fmt12(y)));
                last = Some((x.clone(), y.clone()));
            }
        }
    }
    out
}

/// `item,prob,price` rows: one per menu entry.
pub fn menu_csv(poset: &ItemPoset, m: &Mechanism) -> String {
    let mut out = String::from("item,prob,price\n");
    for (g, a) in m.allocation.iter().enumerate() {
        for (prob, price) in a.menu() {
            out.push_str(&format!("{},{},{}\n", poset.label(g), fmt12(&prob), fmt12(&price)));
        }
    }
    out
}
