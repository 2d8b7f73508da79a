//! Additive MIMO transfer-function models.
//!
//! A model is a sum of `K` subsystems `G_i(p) = B_i(p) / A_i(p)` where each
//! `A_i` is a scalar unit-constant polynomial and each `B_i` an `n_y x n_u`
//! matrix polynomial. The parameter vector stacks, per subsystem,
//! `a_{i,1..n_i}` followed by `vec(B_{i,0}) .. vec(B_{i,m_i})` with a
//! column-major `vec`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::poly::{coprime, ScalarPoly};
use crate::error::{Error, Result};
use crate::linalg;

/// Matrix polynomial `B(p) = B_0 + B_1 p + ...` with shared coefficient shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPoly {
    coeffs: Vec<DMatrix<f64>>,
}

impl MatrixPoly {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidModel("matrix polynomial needs a coefficient".into()))?;
        let shape = first.shape();
        if coeffs.iter().any(|c| c.shape() != shape) {
            return Err(Error::DimMismatch(
                "matrix polynomial coefficients differ in shape".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(b0: DMatrix<f64>) -> Self {
        Self { coeffs: vec![b0] }
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn n_y(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn n_u(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|&x| x == 0.0))
    }

    /// Entry `(row, col)` as a scalar polynomial.
    pub fn entry(&self, row: usize, col: usize) -> ScalarPoly {
        ScalarPoly::new(
            self.coeffs
                .iter()
                .map(|c| c[(row, col)])
                .collect::<Vec<_>>(),
        )
    }

    pub fn eval(&self, s: Complex<f64>) -> DMatrix<Complex<f64>> {
        let mut acc = DMatrix::<Complex<f64>>::zeros(self.n_y(), self.n_u());
        for c in self.coeffs.iter().rev() {
            acc = acc * s + c.map(|x| Complex::new(x, 0.0));
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    den: ScalarPoly,
    num: MatrixPoly,
}

impl Subsystem {
    pub fn new(den: ScalarPoly, num: MatrixPoly) -> Result<Self> {
        if !den.is_unit_constant() {
            return Err(Error::InvalidModel(
                "denominator constant coefficient must equal 1".into(),
            ));
        }
        if num.degree() > den.degree() {
            return Err(Error::InvalidModel(format!(
                "subsystem is improper: numerator order {} > denominator order {}",
                num.degree(),
                den.degree()
            )));
        }
        Ok(Self { den, num })
    }

    pub fn den(&self) -> &ScalarPoly {
        &self.den
    }

    pub fn num(&self) -> &MatrixPoly {
        &self.num
    }

    /// Denominator order `n_i`.
    pub fn n(&self) -> usize {
        self.den.degree()
    }

    /// Numerator order `m_i`.
    pub fn m(&self) -> usize {
        self.num.degree()
    }

    pub fn is_biproper(&self) -> bool {
        self.m() == self.n()
    }

    pub fn order(&self) -> SubsystemOrder {
        SubsystemOrder {
            n: self.n(),
            m: self.m(),
        }
    }

    pub fn dim_theta(&self) -> usize {
        self.order().dim_theta(self.num.n_u(), self.num.n_y())
    }

    pub fn eval(&self, s: Complex<f64>) -> DMatrix<Complex<f64>> {
        self.num.eval(s) / self.den.eval(s)
    }

    fn theta(&self) -> Vec<f64> {
        let mut out = self.den.coeffs()[1..].to_vec();
        out.resize(self.n(), 0.0);
        for c in self.num.coeffs() {
            out.extend_from_slice(c.as_slice());
        }
        out
    }
}

/// Orders `(n_i, m_i)` of one subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubsystemOrder {
    pub n: usize,
    pub m: usize,
}

impl SubsystemOrder {
    pub fn dim_theta(&self, n_u: usize, n_y: usize) -> usize {
        self.n + (self.m + 1) * n_u * n_y
    }
}

/// Shape of an additive model: channel counts and per-subsystem orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStructure {
    pub n_u: usize,
    pub n_y: usize,
    pub orders: Vec<SubsystemOrder>,
}

impl ModelStructure {
    pub fn dim_beta(&self) -> usize {
        self.orders
            .iter()
            .map(|o| o.dim_theta(self.n_u, self.n_y))
            .sum()
    }

    /// Offset of subsystem `i` inside the parameter vector.
    pub fn offset(&self, i: usize) -> usize {
        self.orders[..i]
            .iter()
            .map(|o| o.dim_theta(self.n_u, self.n_y))
            .sum()
    }

    /// Inverse of [`AdditiveModel::flatten`]. Denominator coefficients may
    /// carry exact zeros in the highest degree; the declared order is kept.
    pub fn unflatten(&self, beta: &DVector<f64>) -> Result<AdditiveModel> {
        if beta.len() != self.dim_beta() {
            return Err(Error::DimMismatch(format!(
                "parameter vector has length {}, structure expects {}",
                beta.len(),
                self.dim_beta()
            )));
        }
        let nb = self.n_u * self.n_y;
        let mut pos = 0;
        let mut subsystems = Vec::with_capacity(self.orders.len());
        for o in &self.orders {
            let a = &beta.as_slice()[pos..pos + o.n];
            pos += o.n;
            let mut coeffs = Vec::with_capacity(o.m + 1);
            for _ in 0..=o.m {
                coeffs.push(DMatrix::from_column_slice(
                    self.n_y,
                    self.n_u,
                    &beta.as_slice()[pos..pos + nb],
                ));
                pos += nb;
            }
            subsystems.push(Subsystem::with_declared_order(a, MatrixPoly::new(coeffs)?)?);
        }
        AdditiveModel::from_subsystems_unchecked(subsystems)
    }
}

impl Subsystem {
    /// Builds a subsystem keeping order `a.len()` even when the top
    /// coefficient is zero (parameter vectors fix the structure).
    fn with_declared_order(a: &[f64], num: MatrixPoly) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(a.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(a);
        let den = ScalarPoly::new(coeffs);
        if den.degree() != a.len() {
            return Err(Error::InvalidModel(
                "leading denominator coefficient is zero".into(),
            ));
        }
        Self::new(den, num)
    }
}

/// Sum of `K` subsystems sharing channel counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct AdditiveModel {
    n_u: usize,
    n_y: usize,
    subsystems: Vec<Subsystem>,
}

impl AdditiveModel {
    /// Builds a model and enforces the identifiability invariants: shared
    /// channel counts, properness, at most one biproper subsystem, pairwise
    /// coprime denominators.
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        let model = Self::from_subsystems_unchecked(subsystems)?;
        model.validate()?;
        Ok(model)
    }

    /// Builds a model checking only channel counts. Useful for simulation of
    /// sums that are not identifiable as written (e.g. repeated subsystems).
    pub fn from_subsystems_unchecked(subsystems: Vec<Subsystem>) -> Result<Self> {
        let first = subsystems
            .first()
            .ok_or_else(|| Error::InvalidModel("model needs at least one subsystem".into()))?;
        let (n_y, n_u) = (first.num.n_y(), first.num.n_u());
        if subsystems
            .iter()
            .any(|s| s.num.n_y() != n_y || s.num.n_u() != n_u)
        {
            return Err(Error::DimMismatch(
                "subsystems disagree on channel counts".into(),
            ));
        }
        Ok(Self {
            n_u,
            n_y,
            subsystems,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let biproper = self.subsystems.iter().filter(|s| s.is_biproper()).count();
        if biproper > 1 {
            return Err(Error::InvalidModel(format!(
                "{biproper} biproper subsystems; at most one may carry feedthrough"
            )));
        }
        for i in 0..self.subsystems.len() {
            for j in i + 1..self.subsystems.len() {
                if !coprime(&self.subsystems[i].den, &self.subsystems[j].den) {
                    return Err(Error::InvalidModel(format!(
                        "denominators of subsystems {i} and {j} share a root"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// Number of subsystems `K`.
    pub fn k(&self) -> usize {
        self.subsystems.len()
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn structure(&self) -> ModelStructure {
        ModelStructure {
            n_u: self.n_u,
            n_y: self.n_y,
            orders: self.subsystems.iter().map(Subsystem::order).collect(),
        }
    }

    pub fn dim_beta(&self) -> usize {
        self.structure().dim_beta()
    }

    pub fn flatten(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.dim_beta());
        for s in &self.subsystems {
            out.extend(s.theta());
        }
        DVector::from_vec(out)
    }

    /// Subsystem `i`'s block `theta_i` of the parameter vector.
    pub fn theta(&self, i: usize) -> DVector<f64> {
        DVector::from_vec(self.subsystems[i].theta())
    }

    /// Reorders subsystems so that output position `j` holds `self[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            n_u: self.n_u,
            n_y: self.n_y,
            subsystems: perm.iter().map(|&p| self.subsystems[p].clone()).collect(),
        }
    }

    /// Replaces subsystem `i`.
    pub fn with_subsystem(&self, i: usize, s: Subsystem) -> Self {
        let mut out = self.clone();
        out.subsystems[i] = s;
        out
    }

    /// True when every denominator root has real part below `-margin`.
    pub fn is_stable(&self, margin: f64) -> bool {
        self.subsystems.iter().all(|s| s.den.is_hurwitz(margin))
    }

    pub fn max_time_constant(&self) -> f64 {
        self.subsystems
            .iter()
            .map(|s| s.den.max_time_constant())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// On-disk model schema. The constant denominator term is implied; matrices
/// are row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub n_u: usize,
    pub n_y: usize,
    pub subsystems: Vec<SubsystemJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsystemJson {
    pub a: Vec<f64>,
    pub b: Vec<Vec<Vec<f64>>>,
}

impl From<AdditiveModel> for ModelJson {
    fn from(m: AdditiveModel) -> Self {
        ModelJson {
            n_u: m.n_u,
            n_y: m.n_y,
            subsystems: m
                .subsystems
                .iter()
                .map(|s| SubsystemJson {
                    a: s.den.coeffs()[1..].to_vec(),
                    b: s.num.coeffs().iter().map(linalg::to_rows).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelJson> for AdditiveModel {
    type Error = Error;

    fn try_from(j: ModelJson) -> Result<Self> {
        let mut subsystems = Vec::with_capacity(j.subsystems.len());
        for s in &j.subsystems {
            let coeffs =
                s.b.iter()
                    .map(|rows| linalg::from_rows(rows))
                    .collect::<Result<Vec<_>>>()?;
            if coeffs.iter().any(|c| c.shape() != (j.n_y, j.n_u)) {
                return Err(Error::DimMismatch(format!(
                    "numerator coefficients must be {} x {}",
                    j.n_y, j.n_u
                )));
            }
            subsystems.push(Subsystem::with_declared_order(
                &s.a,
                MatrixPoly::new(coeffs)?,
            )?);
        }
        AdditiveModel::from_subsystems_unchecked(subsystems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_mode_model() -> AdditiveModel {
        let s1 = Subsystem::new(
            ScalarPoly::denominator(&[0.1, 0.5]),
            MatrixPoly::constant(DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.])),
        )
        .unwrap();
        let s2 = Subsystem::new(
            ScalarPoly::denominator(&[0.3]),
            MatrixPoly::new(vec![
                DMatrix::from_row_slice(2, 3, &[0.5, 0., 0., 0., 0.5, 0.]),
                DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]),
            ])
            .unwrap(),
        )
        .unwrap();
        AdditiveModel::new(vec![s1, s2]).unwrap()
    }

    #[test]
    fn flatten_layout_is_column_major() {
        let m = two_mode_model();
        let b = m.flatten();
        assert_eq!(b.len(), 2 + 6 + 1 + 12);
        assert_eq!(&b.as_slice()[..2], &[0.1, 0.5]);
        // vec(B_{1,0}) column-major: 1, 4, 2, 5, 3, 6
        assert_eq!(&b.as_slice()[2..8], &[1., 4., 2., 5., 3., 6.]);
        assert_eq!(b[8], 0.3);
        assert_eq!(m.structure().offset(1), 8);
    }

    #[test]
    fn unflatten_inverts_flatten() {
        let m = two_mode_model();
        let back = m.structure().unflatten(&m.flatten()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_is_row_major() {
        let m = two_mode_model();
        let js = m.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&js).unwrap();
        assert_eq!(
            v["subsystems"][0]["b"][0][0],
            serde_json::json!([1.0, 2.0, 3.0])
        );
        assert_eq!(v["subsystems"][0]["a"], serde_json::json!([0.1, 0.5]));
        assert_eq!(AdditiveModel::from_json(&js).unwrap(), m);
    }

    #[test]
    fn rejects_two_biproper_subsystems() {
        let gain = |g: f64| {
            Subsystem::new(
                ScalarPoly::one(),
                MatrixPoly::constant(DMatrix::identity(2, 2) * g),
            )
            .unwrap()
        };
        assert!(AdditiveModel::new(vec![gain(0.5), gain(0.5)]).is_err());
        assert!(AdditiveModel::from_subsystems_unchecked(vec![gain(0.5), gain(0.5)]).is_ok());
    }

    #[test]
    fn rejects_shared_denominator_roots() {
        let s = Subsystem::new(
            ScalarPoly::denominator(&[1.0]),
            MatrixPoly::constant(DMatrix::identity(1, 1)),
        )
        .unwrap();
        assert!(AdditiveModel::new(vec![s.clone(), s]).is_err());
    }

    #[test]
    fn rejects_improper_and_non_unit_constant() {
        let num = MatrixPoly::new(vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)]).unwrap();
        assert!(Subsystem::new(ScalarPoly::one(), num).is_err());
        let bad_den = ScalarPoly::new(vec![2.0, 1.0]);
        assert!(Subsystem::new(bad_den, MatrixPoly::constant(DMatrix::identity(1, 1))).is_err());
    }
}
