//! Nonlinear controllability: Lie-bracket trees and their rank, the
//! ad-iterate test for single-input drift systems, car and unicycle
//! kinematics, and commutator maneuvers.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{dvector, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::{lie_bracket, DiffConfig, State, VectorField};
use crate::linalg::numeric_rank_with;
use crate::ode::{flow, step, Method};
use crate::stability::least_squares_slope;

/// Deepest bracket nesting evaluated numerically.
pub const BRACKET_DEPTH_CAP: usize = 3;

/// Relative singular-value threshold for ranks of numerically bracketed
/// columns; nested differences leave noise well above machine precision.
pub const BRACKET_RANK_TOL: f64 = 1e-6;

type DomainCheck = Arc<dyn Fn(&State) -> Result<()> + Send + Sync>;

#[derive(Clone)]
pub struct ControlAffineSystem {
    pub drift: Option<VectorField>,
    pub inputs: Vec<VectorField>,
    domain: Option<DomainCheck>,
}

impl ControlAffineSystem {
    pub fn new(drift: Option<VectorField>, inputs: Vec<VectorField>) -> Result<Self> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::invalid("inputs", "need at least one input field"))?;
        let n = first.dim();
        for g in inputs.iter().chain(drift.iter()) {
            check_dim("field dimension", n, g.dim())?;
        }
        Ok(ControlAffineSystem {
            drift,
            inputs,
            domain: None,
        })
    }

    pub fn with_domain(
        mut self,
        check: impl Fn(&State) -> Result<()> + Send + Sync + 'static,
    ) -> Self {
        self.domain = Some(Arc::new(check));
        self
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn is_driftless(&self) -> bool {
        self.drift.is_none()
    }

    pub fn check_domain(&self, x: &State) -> Result<()> {
        match &self.domain {
            Some(d) => d(x),
            None => Ok(()),
        }
    }

    /// Generators in tree order: drift first when present, then inputs.
    pub fn generators(&self) -> Vec<(String, VectorField)> {
        let mut out = Vec::new();
        if let Some(f) = &self.drift {
            out.push(("f".to_string(), f.clone()));
        }
        for (j, g) in self.inputs.iter().enumerate() {
            out.push((format!("g{}", j + 1), g.clone()));
        }
        out
    }

    /// `f(x) + Σ uⱼ gⱼ(x)`.
    pub fn velocity(&self, x: &State, u: &DVector<f64>) -> State {
        let mut v = self
            .drift
            .as_ref()
            .map_or_else(|| State::zeros(x.len()), |f| f.eval(x));
        for (g, &uj) in self.inputs.iter().zip(u.iter()) {
            if uj != 0.0 {
                v += g.eval(x) * uj;
            }
        }
        v
    }
}

/// Bracket expression over generator indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BracketExpr {
    Generator(usize),
    Bracket(Box<BracketExpr>, Box<BracketExpr>),
}

impl BracketExpr {
    pub fn depth(&self) -> usize {
        match self {
            BracketExpr::Generator(_) => 0,
            BracketExpr::Bracket(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn label(&self, names: &[String]) -> String {
        match self {
            BracketExpr::Generator(i) => names[*i].clone(),
            BracketExpr::Bracket(a, b) => format!("[{},{}]", a.label(names), b.label(names)),
        }
    }

    /// Field for this expression with every level differenced at `cfg.step`.
    fn build(&self, gens: &[VectorField], cfg: &DiffConfig) -> VectorField {
        match self {
            BracketExpr::Generator(i) => gens[*i].clone(),
            BracketExpr::Bracket(a, b) => {
                let (fa, fb, cfg) = (a.build(gens, cfg), b.build(gens, cfg), *cfg);
                VectorField::new(fa.dim(), move |x| {
                    lie_bracket(&fa, &fb, x, &cfg)
                        .unwrap_or_else(|_| State::from_element(x.len(), f64::NAN))
                })
            }
        }
    }
}

/// Difference step for a bracket nested `depth` levels, balancing
/// truncation against rounding noise that compounds per level.
pub fn bracket_step(cfg: &DiffConfig, depth: usize) -> f64 {
    let widest = cfg.step.max(cfg.wide_step);
    (cfg.step * 10f64.powi(depth.saturating_sub(1) as i32)).min(widest)
}

#[derive(Clone)]
pub struct BracketNode {
    pub label: String,
    pub depth: usize,
    pub expr: BracketExpr,
    pub field: VectorField,
}

impl BracketNode {
    pub fn value_at(&self, x: &State) -> State {
        self.field.eval(x)
    }
}

impl fmt::Debug for BracketNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BracketNode")
            .field("label", &self.label)
            .field("depth", &self.depth)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedNode {
    pub label: String,
    pub depth: usize,
    pub value: Vec<f64>,
}

fn check_depth(depth_max: usize) -> Result<()> {
    if depth_max > BRACKET_DEPTH_CAP {
        return Err(Error::DepthExceeded {
            requested: depth_max,
            cap: BRACKET_DEPTH_CAP,
        });
    }
    Ok(())
}

/// Bracket tree up to `depth_max`: generators, then `[a,b]` for ordered
/// generator pairs, then `[node, generator]` by ascending depth.
pub fn bracket_tree(
    sys: &ControlAffineSystem,
    depth_max: usize,
    cfg: &DiffConfig,
) -> Result<Vec<BracketNode>> {
    check_depth(depth_max)?;
    cfg.validate()?;
    let (names, gens): (Vec<String>, Vec<VectorField>) = sys.generators().into_iter().unzip();
    let k = gens.len();
    let mut exprs: Vec<BracketExpr> = (0..k).map(BracketExpr::Generator).collect();
    let mut frontier: Vec<BracketExpr> = Vec::new();
    if depth_max >= 1 {
        for a in 0..k {
            for b in a + 1..k {
                frontier.push(BracketExpr::Bracket(
                    Box::new(BracketExpr::Generator(a)),
                    Box::new(BracketExpr::Generator(b)),
                ));
            }
        }
        exprs.extend(frontier.iter().cloned());
    }
    for _ in 2..=depth_max {
        let next: Vec<BracketExpr> = frontier
            .iter()
            .flat_map(|node| {
                (0..k).map(move |c| {
                    BracketExpr::Bracket(
                        Box::new(node.clone()),
                        Box::new(BracketExpr::Generator(c)),
                    )
                })
            })
            .collect();
        exprs.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(exprs
        .into_iter()
        .map(|e| {
            let depth = e.depth();
            let step_cfg = DiffConfig {
                step: bracket_step(cfg, depth),
                ..*cfg
            };
            BracketNode {
                label: e.label(&names),
                depth,
                field: e.build(&gens, &step_cfg),
                expr: e,
            }
        })
        .collect())
}

/// Evaluate every tree node at `x`.
pub fn evaluate_tree(tree: &[BracketNode], x: &State) -> Vec<EvaluatedNode> {
    tree.iter()
        .map(|n| EvaluatedNode {
            label: n.label.clone(),
            depth: n.depth,
            value: n.value_at(x).iter().cloned().collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVerdict {
    pub rank: usize,
    pub controllable: bool,
}

fn rank_of(columns: &[State], n: usize) -> Result<RankVerdict> {
    let mut m = DMatrix::zeros(n, columns.len());
    for (j, c) in columns.iter().enumerate() {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("bracket column is not finite".into()));
        }
        m.set_column(j, c);
    }
    let rank = numeric_rank_with(&m, BRACKET_RANK_TOL);
    Ok(RankVerdict {
        rank,
        controllable: rank == n,
    })
}

/// Rank of the bracket tree at `x`.
pub fn stlc_rank(
    sys: &ControlAffineSystem,
    x: &State,
    depth_max: usize,
    cfg: &DiffConfig,
) -> Result<RankVerdict> {
    check_dim("state", sys.dim(), x.len())?;
    sys.check_domain(x)?;
    let tree = bracket_tree(sys, depth_max, cfg)?;
    let cols: Vec<State> = tree.iter().map(|n| n.value_at(x)).collect();
    rank_of(&cols, sys.dim())
}

/// `g, [f,g], [f,[f,g]], …` up to `n − 1` brackets.
pub fn ad_family(sys: &ControlAffineSystem, x: &State, cfg: &DiffConfig) -> Result<Vec<State>> {
    let f = sys
        .drift
        .clone()
        .unwrap_or_else(|| VectorField::zero(sys.dim()));
    if sys.inputs.len() != 1 {
        return Err(Error::invalid(
            "inputs",
            "drift test takes a single input field",
        ));
    }
    let n = sys.dim();
    check_dim("state", n, x.len())?;
    check_depth(n - 1)?;
    let gens = [f, sys.inputs[0].clone()];
    let mut expr = BracketExpr::Generator(1);
    let mut out = Vec::with_capacity(n);
    for depth in 0..n {
        let step_cfg = DiffConfig {
            step: bracket_step(cfg, depth),
            ..*cfg
        };
        out.push(expr.build(&gens, &step_cfg).eval(x));
        expr = BracketExpr::Bracket(Box::new(BracketExpr::Generator(0)), Box::new(expr));
    }
    Ok(out)
}

/// Rank of `{g, ad_f g, …, ad_f^{n−1} g}` at `x`.
pub fn drift_controllability(
    sys: &ControlAffineSystem,
    x: &State,
    cfg: &DiffConfig,
) -> Result<RankVerdict> {
    sys.check_domain(x)?;
    rank_of(&ad_family(sys, x, cfg)?, sys.dim())
}

// --- car and unicycle -------------------------------------------------------

fn steering_guard(phi: f64) -> Result<()> {
    if phi.abs() < FRAC_PI_2 && phi.cos().abs() > 1e-12 {
        Ok(())
    } else {
        Err(Error::Domain(format!("steering angle {phi} reaches ±π/2")))
    }
}

/// Car kinematics on `(x, y, θ, φ)`: drive `(cos θ, sin θ, tan φ / L, 0)`, steer `∂_φ`.
pub fn car_system(wheelbase: f64) -> Result<ControlAffineSystem> {
    if !(wheelbase > 0.0 && wheelbase.is_finite()) {
        return Err(Error::invalid("L", "wheelbase must be positive"));
    }
    let l = wheelbase;
    let drive = VectorField::new(4, move |x| {
        dvector![x[2].cos(), x[2].sin(), x[3].tan() / l, 0.0]
    });
    let steer = VectorField::constant(dvector![0.0, 0.0, 0.0, 1.0]);
    Ok(ControlAffineSystem::new(None, vec![drive, steer])?.with_domain(|x| steering_guard(x[3])))
}

/// `(1 / (L cos²φ)) ∂_θ`.
pub fn car_rotate(x: &State, wheelbase: f64) -> Result<State> {
    steering_guard(x[3])?;
    Ok(dvector![
        0.0,
        0.0,
        1.0 / (wheelbase * x[3].cos().powi(2)),
        0.0
    ])
}

/// `(1 / (L cos²φ)) (sin θ ∂_x − cos θ ∂_y)`.
pub fn car_slide(x: &State, wheelbase: f64) -> Result<State> {
    steering_guard(x[3])?;
    let k = 1.0 / (wheelbase * x[3].cos().powi(2));
    Ok(dvector![k * x[2].sin(), -k * x[2].cos(), 0.0, 0.0])
}

/// Unicycle `g₁ = (cos x₃, sin x₃, 0)`, `g₂ = ∂_{x₃}`.
pub fn unicycle_system() -> ControlAffineSystem {
    let roll = VectorField::new(3, |x| dvector![x[2].cos(), x[2].sin(), 0.0]);
    let turn = VectorField::constant(dvector![0.0, 0.0, 1.0]);
    ControlAffineSystem::new(None, vec![roll, turn]).expect("unicycle fields share dimension")
}

/// `[g₁, g₂] = (sin x₃, −cos x₃, 0)`.
pub fn unicycle_bracket(x: &State) -> State {
    dvector![x[2].sin(), -x[2].cos(), 0.0]
}

// --- maneuvers --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub input: Vec<f64>,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub segments: Vec<Segment>,
}

impl Maneuver {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments
            .iter()
            .any(|s| !(s.duration > 0.0 && s.duration.is_finite()))
        {
            return Err(Error::invalid(
                "duration",
                "segment durations must be positive",
            ));
        }
        Ok(Maneuver { segments })
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Same schedule with every input sign flipped.
    pub fn negated(&self) -> Maneuver {
        Maneuver {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    input: s.input.iter().map(|u| -u).collect(),
                    duration: s.duration,
                })
                .collect(),
        }
    }

    /// Undo the maneuver: reverse order and flip signs.
    pub fn reversed(&self) -> Maneuver {
        let mut m = self.negated();
        m.segments.reverse();
        m
    }

    /// CSV `segment,u1..um,duration`.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let m = self.segments.first().map_or(0, |s| s.input.len());
        let mut out = String::new();
        for line in preamble {
            out.push_str(line);
            out.push('\n');
        }
        let mut header = vec!["segment".to_string()];
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.push("duration".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for (k, s) in self.segments.iter().enumerate() {
            let mut row = vec![(k + 1).to_string()];
            row.extend(s.input.iter().map(|&u| crate::trajectory::fmt_num(u)));
            row.push(crate::trajectory::fmt_num(s.duration));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn unit_input(m: usize, i: usize, sign: f64) -> Vec<f64> {
    let mut u = vec![0.0; m];
    u[i] = sign;
    u
}

/// Inputs `eᵢ, eⱼ, −eᵢ, −eⱼ` for `eps` each; net motion `ε²[gᵢ, gⱼ] + O(ε³)`.
pub fn commutator_maneuver(
    sys: &ControlAffineSystem,
    i: usize,
    j: usize,
    eps: f64,
) -> Result<Maneuver> {
    let m = sys.inputs.len();
    if i >= m || j >= m {
        return Err(Error::invalid(
            "input index",
            format!("system has {m} inputs"),
        ));
    }
    if i == j {
        return Err(Error::invalid(
            "input index",
            "commutator needs two distinct inputs",
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    Maneuver::new(
        [(i, 1.0), (j, 1.0), (i, -1.0), (j, -1.0)]
            .iter()
            .map(|&(k, s)| Segment {
                input: unit_input(m, k, s),
                duration: eps,
            })
            .collect(),
    )
}

/// Eight equal segments of steer/drive whose net motion follows `slide`
/// to leading order.
///
/// The pattern is steer, drive, steer back, drive more, steer, drive back,
/// steer back, drive back, run with reversed steering direction: taken
/// literally it slides along `−slide`.
pub fn parking_maneuver(sys: &ControlAffineSystem, eps: f64) -> Result<Maneuver> {
    if sys.inputs.len() != 2 {
        return Err(Error::invalid(
            "system",
            "parking needs drive and steer inputs",
        ));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    // (input index, sign): 0 = drive, 1 = steer.
    let literal = [
        (1, 1.0),
        (0, 1.0),
        (1, -1.0),
        (0, 1.0),
        (1, 1.0),
        (0, -1.0),
        (1, -1.0),
        (0, -1.0),
    ];
    Maneuver::new(
        literal
            .iter()
            .map(|&(k, s)| Segment {
                input: unit_input(2, k, if k == 1 { -s } else { s }),
                duration: eps,
            })
            .collect(),
    )
}

/// RK4 substeps per segment, at most `max_dt` long each.
#[derive(Debug, Clone)]
pub struct ManeuverRun {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl ManeuverRun {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("run holds the initial state")
    }
}

pub fn execute_maneuver(
    sys: &ControlAffineSystem,
    maneuver: &Maneuver,
    x0: &State,
    max_dt: f64,
) -> Result<ManeuverRun> {
    check_dim("state", sys.dim(), x0.len())?;
    if !(max_dt > 0.0) {
        return Err(Error::invalid("max_dt", "must be positive"));
    }
    sys.check_domain(x0)?;
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut run = ManeuverRun {
        times: vec![0.0],
        states: vec![x.clone()],
    };
    for seg in &maneuver.segments {
        check_dim("segment input", sys.inputs.len(), seg.input.len())?;
        let u = DVector::from_vec(seg.input.clone());
        let n = (seg.duration / max_dt).ceil().max(1.0) as usize;
        let h = seg.duration / n as f64;
        let rhs = |_t: f64, x: &State| sys.velocity(x, &u);
        for _ in 0..n {
            x = step(Method::Rk4, &rhs, t, &x, h);
            t += h;
            sys.check_domain(&x)?;
            crate::ode::ensure_finite(&x, t)?;
            run.times.push(t);
            run.states.push(x.clone());
        }
    }
    Ok(run)
}

/// `|x(4ε) − x0 − ε²[gᵢ,gⱼ](x0)|` after running the commutator maneuver.
pub fn commutator_residual(
    sys: &ControlAffineSystem,
    i: usize,
    j: usize,
    x0: &State,
    eps: f64,
    cfg: &DiffConfig,
) -> Result<f64> {
    let man = commutator_maneuver(sys, i, j, eps)?;
    let end = execute_maneuver(sys, &man, x0, eps / 200.0)?;
    let br = lie_bracket(&sys.inputs[i], &sys.inputs[j], x0, cfg)?;
    Ok((end.final_state() - x0 - br * (eps * eps)).norm())
}

/// Log-log slope of the commutator residual over `eps_values`.
pub fn commutator_order(
    sys: &ControlAffineSystem,
    i: usize,
    j: usize,
    x0: &State,
    eps_values: &[f64],
    cfg: &DiffConfig,
) -> Result<f64> {
    if eps_values.len() < 2 {
        return Err(Error::invalid("eps_values", "need at least two step sizes"));
    }
    let pts = eps_values
        .iter()
        .map(|&e| Ok((e.ln(), commutator_residual(sys, i, j, x0, e, cfg)?.ln())))
        .collect::<Result<Vec<_>>>()?;
    Ok(least_squares_slope(&pts))
}

/// `n` compositions of `F^{gᵢ}_s, F^{gⱼ}_s, F^{−gᵢ}_s, F^{−gⱼ}_s`, `s = √(t/n)`,
/// approximating the flow of `[gᵢ, gⱼ]` for time `t`.
pub fn bracket_flow_limit(
    sys: &ControlAffineSystem,
    i: usize,
    j: usize,
    x0: &State,
    t: f64,
    n: usize,
    substeps: usize,
) -> Result<State> {
    let m = sys.inputs.len();
    if i >= m || j >= m {
        return Err(Error::invalid(
            "input index",
            format!("system has {m} inputs"),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("n_compositions", "must be at least 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("t", "must be nonnegative"));
    }
    check_dim("state", sys.dim(), x0.len())?;
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let s = (t / n as f64).sqrt();
    let (gi, gj) = (&sys.inputs[i], &sys.inputs[j]);
    let substeps = substeps.max(1);
    let mut x = x0.clone();
    for _ in 0..n {
        x = flow(gi, &x, s, substeps, Method::Rk4);
        x = flow(gj, &x, s, substeps, Method::Rk4);
        x = flow(gi, &x, -s, substeps, Method::Rk4);
        x = flow(gj, &x, -s, substeps, Method::Rk4);
    }
    Ok(x)
}
