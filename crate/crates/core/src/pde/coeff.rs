//! Coefficient fields `A(x, t)` for `L = div A∇` in the upper half-plane.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix2 = [[f64; 2]; 2];

type Evaluator = dyn Fn(f64, f64) -> Matrix2 + Send + Sync;

/// Directions used by the ellipticity probe.
pub const PROBE_DIRECTIONS: usize = 16;

const PROBE_TOL: f64 = 1e-12;

#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    params: Vec<f64>,
    lambda: f64,
    symmetric: bool,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("lambda", &self.lambda)
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

/// Registry identity of a field, as echoed in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorId {
    pub name: String,
    pub params: Vec<f64>,
    pub lambda: f64,
    pub symmetric: bool,
}

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        params: Vec<f64>,
        lambda: f64,
        symmetric: bool,
        eval: impl Fn(f64, f64) -> Matrix2 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Parameter(format!("ellipticity constant {lambda} not in (0, 1]")));
        }
        Ok(CoefficientField {
            name: name.into(),
            params,
            lambda,
            symmetric,
            eval: Arc::new(eval),
        })
    }

    pub fn identity() -> Self {
        Self::new("identity", vec![], 1.0, true, |_, _| [[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    pub fn diagonal(a11: f64, a22: f64) -> Result<Self> {
        if !(a11 > 0.0 && a22 > 0.0) {
            return Err(Error::Parameter("diagonal entries must be positive".into()));
        }
        let lo = a11.min(a22);
        let hi = a11.max(a22);
        let lambda = lo.min(1.0 / hi).min(1.0);
        Self::new("diagonal", vec![a11, a22], lambda, true, move |_, _| {
            [[a11, 0.0], [0.0, a22]]
        })
    }

    /// `a11 = 1 + amp·sin(2πx)·e^{−t}`, `a22 = 1`.
    pub fn smooth_variable(amp: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amp) {
            return Err(Error::Parameter(format!("amplitude {amp} not in [0, 1)")));
        }
        let lambda = (1.0 - amp).min(1.0 / (1.0 + amp));
        Self::new("smooth", vec![amp], lambda, true, move |x, t| {
            let a11 = 1.0 + amp * (2.0 * std::f64::consts::PI * x).sin() * (-t).exp();
            [[a11, 0.0], [0.0, 1.0]]
        })
    }

    /// `[[1, c], [−c, 1]]`; `λ = 1/‖A‖`.
    pub fn skew(c: f64) -> Result<Self> {
        let lambda = 1.0 / (1.0 + c * c).sqrt();
        Self::new("skew", vec![c], lambda, c == 0.0, move |_, _| [[1.0, c], [-c, 1.0]])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn id(&self) -> OperatorId {
        OperatorId {
            name: self.name.clone(),
            params: self.params.clone(),
            lambda: self.lambda,
            symmetric: self.symmetric,
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> Matrix2 {
        (self.eval)(x, t)
    }

    /// Checks `λ|ξ|² ≤ ⟨Aξ, ξ⟩ ≤ λ⁻¹|ξ|²` on the probe directions.
    pub fn probe_matrix(&self, a: &Matrix2, x: f64, t: f64) -> Result<()> {
        probe(a, self.lambda).map_err(|detail| Error::Ellipticity { x, t, detail })
    }

    pub fn probe_at(&self, x: f64, t: f64) -> Result<()> {
        self.probe_matrix(&self.eval(x, t), x, t)
    }
}

fn probe(a: &Matrix2, lambda: f64) -> std::result::Result<(), String> {
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err("non-finite coefficient".into());
    }
    static DIRS: OnceLock<[(f64, f64); PROBE_DIRECTIONS]> = OnceLock::new();
    let dirs = DIRS.get_or_init(|| {
        std::array::from_fn(|k| (2.0 * std::f64::consts::PI * k as f64 / PROBE_DIRECTIONS as f64).sin_cos())
    });
    for (k, &(s, c)) in dirs.iter().enumerate() {
        let q = a[0][0] * c * c + (a[0][1] + a[1][0]) * c * s + a[1][1] * s * s;
        if q < lambda * (1.0 - PROBE_TOL) || q > (1.0 + PROBE_TOL) / lambda {
            return Err(format!(
                "quadratic form {q} outside [{lambda}, {}] in probe direction {k}",
                1.0 / lambda
            ));
        }
    }
    Ok(())
}

/// A Lipschitz function sampled on a uniform grid, extended by constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzGraph {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl LipschitzGraph {
    pub fn sample(f: impl Fn(f64) -> f64, x_lo: f64, x_hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(x_hi > x_lo) {
            return Err(Error::Parameter("need at least two samples on a nonempty interval".into()));
        }
        let dx = (x_hi - x_lo) / (n - 1) as f64;
        let values: Vec<f64> = (0..n).map(|i| f(x_lo + i as f64 * dx)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite graph sample".into()));
        }
        Ok(LipschitzGraph { x0: x_lo, dx, values })
    }

    /// `φ(x) = 0.5·sqrt(x² + 0.1²)`, a smoothed `0.5|x|`.
    pub fn smoothed_abs() -> Self {
        Self::sample(|x| 0.5 * (x * x + 0.01).sqrt(), -64.0, 64.0, (1 << 16) + 1).unwrap()
    }

    fn segment(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.values.len();
        let s = (x - self.x0) / self.dx;
        if s < 0.0 || s > (n - 1) as f64 {
            return None;
        }
        let i = (s.floor() as usize).min(n - 2);
        Some((i, s - i as f64))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some((i, f)) => self.values[i] * (1.0 - f) + self.values[i + 1] * f,
            None if x < self.x0 => self.values[0],
            None => *self.values.last().unwrap(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some((i, _)) => (self.values[i + 1] - self.values[i]) / self.dx,
            None => 0.0,
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| ((w[1] - w[0]) / self.dx).abs())
            .fold(0.0, f64::max)
    }
}

/// `J A Jᵀ` with `J = [[1, 0], [−p, 1]]`.
pub fn conjugate(a: &Matrix2, p: f64) -> Matrix2 {
    [
        [a[0][0], a[0][1] - p * a[0][0]],
        [a[1][0] - p * a[0][0], p * p * a[0][0] - p * (a[0][1] + a[1][0]) + a[1][1]],
    ]
}

/// Pulls `A` back through `Φ(x, t) = (x, t − φ(x))`:
/// `B(x, s) = J A(x, s + φ(x)) Jᵀ`.
pub fn graph_transform(phi: &LipschitzGraph, a: &CoefficientField) -> Result<CoefficientField> {
    let m = phi.lipschitz_constant();
    if !m.is_finite() {
        return Err(Error::Parameter("graph is not Lipschitz".into()));
    }
    // Eigenvalues of J Jᵀ at slope m have product 1.
    let mu_plus = (2.0 + m * m + m * (m * m + 4.0).sqrt()) / 2.0;
    let lambda = a.lambda() / mu_plus;
    let inner = a.clone();
    let graph = phi.clone();
    let mut params = vec![m];
    params.extend_from_slice(a.params());
    let field = CoefficientField::new(
        format!("pullback-{}", a.name()),
        params,
        lambda,
        a.is_symmetric(),
        move |x, s| {
            let p = graph.derivative(x);
            conjugate(&inner.eval(x, s + graph.value(x)), p)
        },
    )?;
    // Spot probe along the graph; assembly probes every grid point.
    for k in 0..=64 {
        let x = phi.x0 + (phi.values.len() - 1) as f64 * phi.dx * (k as f64 + 0.5) / 65.0;
        field.probe_at(x, 0.5)?;
    }
    Ok(field)
}

/// The shipped operator suite.
pub fn operator_suite() -> Vec<CoefficientField> {
    vec![
        CoefficientField::identity(),
        CoefficientField::diagonal(2.0, 1.0).unwrap(),
        CoefficientField::smooth_variable(0.5).unwrap(),
        CoefficientField::skew(0.3).unwrap(),
        graph_transform(&LipschitzGraph::smoothed_abs(), &CoefficientField::identity()).unwrap(),
    ]
}

/// Looks up a suite operator by registry name: `identity`, `diagonal`,
/// `smooth`, `skew`, `pullback`. Empty `params` selects the suite values.
pub fn operator_by_name(name: &str, params: &[f64]) -> Result<CoefficientField> {
    let arity = |n: usize| -> Result<()> {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::Parameter(format!("operator '{name}' takes {n} parameters")))
        }
    };
    match name {
        "identity" => arity(0).map(|_| CoefficientField::identity()),
        "diagonal" if params.is_empty() => CoefficientField::diagonal(2.0, 1.0),
        "diagonal" => arity(2).and_then(|_| CoefficientField::diagonal(params[0], params[1])),
        "smooth" if params.is_empty() => CoefficientField::smooth_variable(0.5),
        "smooth" => arity(1).and_then(|_| CoefficientField::smooth_variable(params[0])),
        "skew" if params.is_empty() => CoefficientField::skew(0.3),
        "skew" => arity(1).and_then(|_| CoefficientField::skew(params[0])),
        "pullback" => {
            let slope = match params {
                [] => 0.5,
                [m] => *m,
                _ => return Err(Error::Parameter("pullback takes at most one parameter".into())),
            };
            let phi = LipschitzGraph::sample(
                move |x| slope * (x * x + 0.01).sqrt(),
                -64.0,
                64.0,
                (1 << 16) + 1,
            )?;
            graph_transform(&phi, &CoefficientField::identity())
        }
        _ => Err(Error::Parameter(format!("unknown operator '{name}'"))),
    }
}
