//! Constant-coefficient state-space models `ẋ = Ax + Bu`, `y = Cx + Du`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{
    complex_det, complex_solve, condition_number, eigenvalues, numeric_rank, to_complex,
};
use crate::ode::{integrate, IntegratorConfig};
use crate::signal::{InputSignal, SampledSignal};
use crate::trajectory::Trajectory;

/// Gramians with a condition number above this are treated as singular.
pub const GRAMIAN_CONDITION_LIMIT: f64 = 1e12;

/// Default Simpson panel count for [`StateSpaceModel::controllability_gramian`].
pub const DEFAULT_GRAMIAN_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub output: DVector<f64>,
    /// Every eigenvalue of `A` has negative real part.
    pub stable: bool,
    /// `rank(CA⁻¹B) = dim(y)`.
    pub full_output_rank: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub controllable: bool,
}

/// `G(iω)` at each frequency; `None` where `iωI − A` is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub frequencies: Vec<f64>,
    pub values: Vec<Option<DMatrix<Complex64>>>,
}

impl FrequencyResponse {
    /// Frequencies at which the resolvent was singular.
    pub fn resonances(&self) -> Vec<f64> {
        self.frequencies
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_none())
            .map(|(w, _)| *w)
            .collect()
    }
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim("A columns", n, a.ncols())?;
        check_dim("B rows", n, b.nrows())?;
        check_dim("C columns", n, c.ncols())?;
        check_dim("D rows", c.nrows(), d.nrows())?;
        check_dim("D columns", b.ncols(), d.ncols())?;
        if [&a, &b, &c, &d]
            .iter()
            .any(|m| m.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid("model", "entries must be finite"));
        }
        Ok(StateSpaceModel { a, b, c, d })
    }

    /// Model with zero feedthrough.
    pub fn without_feedthrough(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        StateSpaceModel::new(a, b, c, d)
    }

    /// Scalar model `ẋ = ax + bu`, `y = cx + du`.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> Self {
        let m = |v| DMatrix::from_element(1, 1, v);
        StateSpaceModel::new(m(a), m(b), m(c), m(d)).expect("scalar model is consistent")
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        check_dim("state", self.states(), x.len())
    }

    /// Fixed-step simulation of the continuous-time model over `[0, T]`.
    pub fn simulate_continuous(
        &self,
        x0: &DVector<f64>,
        u: &InputSignal,
        t_end: f64,
        cfg: &IntegratorConfig,
    ) -> Result<Trajectory> {
        self.check_state(x0)?;
        check_dim("input signal width", self.inputs(), u.width())?;
        if !(t_end > 0.0) {
            return Err(Error::invalid("T", "must be positive"));
        }
        let base = integrate(|t, x| &self.a * x + &self.b * u.at(t), x0, 0.0, t_end, cfg)?;
        let inputs: Vec<_> = base.times().map(|t| u.at(t)).collect();
        let outputs = base
            .states
            .iter()
            .zip(&inputs)
            .map(|(x, u)| self.output(x, u))
            .collect();
        Trajectory::new(0.0, cfg.dt, base.states, outputs, inputs)
    }

    /// Exact recursion `x(n+1) = Ax(n) + Bu(n)` for `N` steps.
    ///
    /// `u` needs at least `N` entries; when it has `N + 1`, the last one sets
    /// the feedthrough of the final output, otherwise zero input is assumed
    /// there. The trajectory uses unit spacing.
    pub fn simulate_discrete(
        &self,
        x0: &DVector<f64>,
        u: &[DVector<f64>],
        steps: usize,
    ) -> Result<Trajectory> {
        self.check_state(x0)?;
        if u.len() < steps {
            return Err(Error::DimensionMismatch {
                context: "input sequence length",
                expected: steps,
                got: u.len(),
            });
        }
        for v in u {
            check_dim("input width", self.inputs(), v.len())?;
        }
        let mut states = Vec::with_capacity(steps + 1);
        let mut inputs = Vec::with_capacity(steps + 1);
        let mut x = x0.clone();
        for un in u.iter().take(steps) {
            states.push(x.clone());
            inputs.push(un.clone());
            x = &self.a * &x + &self.b * un;
        }
        states.push(x);
        inputs.push(
            u.get(steps)
                .cloned()
                .unwrap_or_else(|| DVector::zeros(self.inputs())),
        );
        let outputs = states
            .iter()
            .zip(&inputs)
            .map(|(x, u)| self.output(x, u))
            .collect();
        Trajectory::new(0.0, 1.0, states, outputs, inputs)
    }

    /// Steady-state output `−CA⁻¹Bu∞` for a constant input.
    pub fn steady_state_output(&self, u_inf: &DVector<f64>) -> Result<SteadyState> {
        check_dim("input", self.inputs(), u_inf.len())?;
        if numeric_rank(&self.a) < self.states() {
            return Err(Error::Singular("state matrix A is not invertible".into()));
        }
        let a_inv_b = self
            .a
            .clone()
            .lu()
            .solve(&self.b)
            .ok_or_else(|| Error::Singular("state matrix A is not invertible".into()))?;
        let gain = &self.c * &a_inv_b;
        let output = -(&gain * u_inf);
        Ok(SteadyState {
            output,
            stable: self.is_stable(),
            full_output_rank: numeric_rank(&gain) == self.outputs(),
        })
    }

    /// All eigenvalues of `A` in the open left half plane.
    pub fn is_stable(&self) -> bool {
        eigenvalues(&self.a).iter().all(|z| z.re < 0.0)
    }

    /// `W[0,T] = ∫₀ᵀ e^{A(T−σ)} B Bᵀ e^{Aᵀ(T−σ)} dσ` by composite Simpson.
    pub fn controllability_gramian(&self, horizon: f64, steps: usize) -> Result<DMatrix<f64>> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("T", "must be positive and finite"));
        }
        let n = self.states();
        let panels = (steps.max(2) + 1) & !1;
        let h = horizon / panels as f64;
        let bbt = &self.b * self.b.transpose();
        let mut w = DMatrix::zeros(n, n);
        for i in 0..=panels {
            let weight = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let e = (&self.a * (horizon - i as f64 * h)).exp();
            w += (&e * &bbt * e.transpose()) * weight;
        }
        w *= h / 3.0;
        Ok((&w + w.transpose()) * 0.5)
    }

    /// Minimum-energy input steering `x0` to `xT` in time `T`, sampled every `dt`.
    pub fn min_energy_control(
        &self,
        x0: &DVector<f64>,
        target: &DVector<f64>,
        horizon: f64,
        dt: f64,
    ) -> Result<SampledSignal> {
        self.check_state(x0)?;
        self.check_state(target)?;
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        let w = self.controllability_gramian(horizon, DEFAULT_GRAMIAN_STEPS)?;
        let condition = condition_number(&w);
        if !(condition < GRAMIAN_CONDITION_LIMIT) {
            return Err(Error::Uncontrollable { condition });
        }
        let drift = target - (&self.a * horizon).exp() * x0;
        let eta = w
            .lu()
            .solve(&drift)
            .ok_or(Error::Uncontrollable { condition })?;
        let steps = (horizon / dt).round() as usize;
        let bt = self.b.transpose();
        let at = self.a.transpose();
        let values = (0..=steps)
            .map(|i| {
                let sigma = i as f64 * dt;
                &bt * (&at * (horizon - sigma)).exp() * &eta
            })
            .collect();
        SampledSignal::new(0.0, dt, values)
    }

    /// Kalman rank test on `(B AB … A^{n−1}B)`.
    pub fn rank_condition(&self) -> RankReport {
        let rank = numeric_rank(&self.controllability_matrix());
        RankReport {
            rank,
            controllable: rank == self.states(),
        }
    }

    pub fn controllability_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.states(), self.inputs());
        let mut out = DMatrix::zeros(n, n * m);
        let mut block = self.b.clone();
        for k in 0..n {
            out.view_mut((0, k * m), (n, m)).copy_from(&block);
            block = &self.a * block;
        }
        out
    }

    /// `G(iω) = C(iωI − A)⁻¹B + D` for each frequency.
    pub fn frequency_response(&self, omegas: &[f64]) -> FrequencyResponse {
        let values = omegas
            .iter()
            .map(|&w| self.transfer(Complex64::new(0.0, w)).ok())
            .collect();
        FrequencyResponse {
            frequencies: omegas.to_vec(),
            values,
        }
    }

    /// `C(sI − A)⁻¹B + D` at a complex point.
    pub fn transfer(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let g = self.resolvent_gain(s)?;
        Ok(g + to_complex(&self.d))
    }

    fn resolvent_gain(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.states();
        let resolvent = DMatrix::<Complex64>::identity(n, n) * s - to_complex(&self.a);
        let x = complex_solve(resolvent, &to_complex(&self.b))
            .ok_or_else(|| Error::Singular(format!("sI − A is singular at s = {s}")))?;
        Ok(to_complex(&self.c) * x)
    }

    /// Closed loop under `u ← u − Ky`: state matrix `A − BKC`.
    pub fn output_feedback(&self, k: &DMatrix<f64>) -> Result<StateSpaceModel> {
        check_dim("K rows", self.inputs(), k.nrows())?;
        check_dim("K columns", self.outputs(), k.ncols())?;
        if self.d.iter().any(|&v| v != 0.0) {
            return Err(Error::invalid(
                "D",
                "output feedback requires zero feedthrough",
            ));
        }
        StateSpaceModel::new(
            &self.a - &self.b * k * &self.c,
            self.b.clone(),
            self.c.clone(),
            self.d.clone(),
        )
    }

    /// `det [[C(Iλ − A)⁻¹B, −I], [I, K]]`; zero exactly at eigenvalues of `A − BKC`.
    pub fn eigenvalue_placement_residual(
        &self,
        k: &DMatrix<f64>,
        lambda: Complex64,
    ) -> Result<Complex64> {
        check_dim("K rows", self.inputs(), k.nrows())?;
        check_dim("K columns", self.outputs(), k.ncols())?;
        let g = self.resolvent_gain(lambda)?;
        let (p, m) = (self.outputs(), self.inputs());
        let mut block = DMatrix::<Complex64>::zeros(p + m, m + p);
        block.view_mut((0, 0), (p, m)).copy_from(&g);
        block
            .view_mut((0, m), (p, p))
            .copy_from(&(-DMatrix::<Complex64>::identity(p, p)));
        block
            .view_mut((p, 0), (m, m))
            .copy_from(&DMatrix::<Complex64>::identity(m, m));
        block.view_mut((p, m), (m, p)).copy_from(&to_complex(k));
        Ok(complex_det(block))
    }

    /// Model driven by `ẏ` whose output is the input `u` that produced it.
    ///
    /// `ẋ = (A − B(CB)⁻¹CA)x + B(CB)⁻¹ẏ`, `u = −(CB)⁻¹CAx + (CB)⁻¹ẏ`.
    pub fn inverse_system(&self) -> Result<StateSpaceModel> {
        let cb = &self.c * &self.b;
        if cb.nrows() != cb.ncols() {
            return Err(Error::invalid(
                "CB",
                format!(
                    "must be square to invert, got {}×{}",
                    cb.nrows(),
                    cb.ncols()
                ),
            ));
        }
        if numeric_rank(&cb) < cb.nrows() || cb.is_empty() {
            return Err(Error::Singular(
                "CB is singular; the system cannot be inverted".into(),
            ));
        }
        let cb_inv = cb
            .try_inverse()
            .ok_or_else(|| Error::Singular("CB is singular".into()))?;
        let ca = &self.c * &self.a;
        let a = &self.a - &self.b * &cb_inv * &ca;
        let b = &self.b * &cb_inv;
        let c = -(&cb_inv * ca);
        StateSpaceModel::new(a, b, c, cb_inv)
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelDoc {
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    D: Option<Vec<Vec<f64>>>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

fn from_rows(name: &'static str, rows: &[Vec<f64>], cols_hint: usize) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(cols_hint, |r| r.len());
    if let Some(r) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch {
            context: name,
            expected: cols,
            got: r.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl StateSpaceModel {
    /// Parse the JSON document `{A, B, C, D}` (row-major nested arrays,
    /// `D` optional and zero when omitted).
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| Error::invalid("model", e.to_string()))?;
        Self::from_doc(doc)
    }

    fn from_doc(doc: ModelDoc) -> Result<Self> {
        let a = from_rows("A row length", &doc.A, 0)?;
        let b = from_rows("B row length", &doc.B, 0)?;
        let c = from_rows("C row length", &doc.C, a.nrows())?;
        let d = match doc.D {
            Some(rows) => from_rows("D row length", &rows, b.ncols())?,
            None => DMatrix::zeros(c.nrows(), b.ncols()),
        };
        StateSpaceModel::new(a, b, c, d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.doc()).expect("model serializes")
    }

    fn doc(&self) -> ModelDoc {
        ModelDoc {
            A: to_rows(&self.a),
            B: to_rows(&self.b),
            C: to_rows(&self.c),
            D: Some(to_rows(&self.d)),
        }
    }
}

impl Serialize for StateSpaceModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpaceModel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(d)?;
        StateSpaceModel::from_doc(doc).map_err(serde::de::Error::custom)
    }
}
