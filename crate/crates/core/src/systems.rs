//! Closed-loop slack-bus, droop and DAPI systems and their H2 norms.
//!
//! Every model has the form `x' = A x + B w`, `y = H x`. The disturbance `w`
//! enters the voltage states only, with `B = I` on those states, and the
//! output is `y = V / sqrt(n)` with `n` the full bus count (also for the
//! slack model, whose state omits the grounded bus). With uniform
//! capacitance `c` the squared norms are
//!
//! ```text
//! slack  c/2n Σ_{i<n}  1 / λ̃_i
//! droop  c/2n Σ_{i<=n} 1 / (λ_i + k_P)
//! DAPI   c/2n Σ_{i<=n} 1 / (λ_i + k_P + cγλ_i / (cγ²λ_i² + kγλ_i² + k k_P γ λ_i + k))
//! ```
//!
//! where `λ_i` are the eigenvalues of the line Laplacian and `λ̃_i` those of
//! the grounded Laplacian.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::network::{laplacian, reduced_laplacian, Network};
use crate::numerics::{eigvals_sym, is_positive_definite, solve_lyapunov, LYAPUNOV_DIM_CAP};
use crate::{Error, Matrix, Result};

/// Uniform controller parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Terminal capacitance, F.
    pub c: f64,
    /// Droop gain, A/V.
    pub kp: f64,
    /// Integrator gain.
    pub k: f64,
    /// Communication Laplacian scaling, `L_q = gamma * L_R`.
    pub gamma: f64,
}

impl Default for ControllerParams {
    /// The 1 mF / k_P = 0.1 / k = 100 / γ = 1000 scenario used for the
    /// radial-network simulation study.
    fn default() -> Self {
        ControllerParams { c: 1e-3, kp: 0.1, k: 100.0, gamma: 1000.0 }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams { name, value })
    }
}

impl ControllerParams {
    pub fn new(c: f64, kp: f64, k: f64, gamma: f64) -> Result<Self> {
        let p = ControllerParams { c, kp, k, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("c", self.c)?;
        check_positive("kp", self.kp)?;
        check_positive("k", self.k)?;
        check_positive("gamma", self.gamma)
    }

    pub fn per_node(&self, n: usize) -> NodeParams {
        NodeParams { c: alloc::vec![self.c; n], kp: alloc::vec![self.kp; n], k: alloc::vec![self.k; n], gamma: self.gamma }
    }
}

/// Per-bus capacitances and gains. Only the assembled models and the
/// Lyapunov oracle accept non-uniform values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    pub c: Vec<f64>,
    pub kp: Vec<f64>,
    pub k: Vec<f64>,
    pub gamma: f64,
}

impl NodeParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.c.len() != n || self.kp.len() != n || self.k.len() != n {
            return Err(Error::DimensionMismatch("one parameter value per bus"));
        }
        for &v in &self.c {
            check_positive("c", v)?;
        }
        for &v in &self.kp {
            check_positive("kp", v)?;
        }
        for &v in &self.k {
            check_positive("k", v)?;
        }
        check_positive("gamma", self.gamma)
    }

    /// The uniform parameters, or [`Error::NonUniformParams`].
    pub fn uniform(&self) -> Result<ControllerParams> {
        let all_eq = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        if !(all_eq(&self.c) && all_eq(&self.kp) && all_eq(&self.k)) || self.c.is_empty() {
            return Err(Error::NonUniformParams);
        }
        ControllerParams::new(self.c[0], self.kp[0], self.k[0], self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Slack,
    Droop,
    Dapi,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Slack, ModelKind::Droop, ModelKind::Dapi];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Slack => "slack",
            ModelKind::Droop => "droop",
            ModelKind::Dapi => "dapi",
        }
    }
}

/// Which bus a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateLabel {
    Voltage(usize),
    Integrator(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub kind: ModelKind,
    pub a: Matrix,
    pub b: Matrix,
    pub h: Matrix,
    pub state_labels: Vec<StateLabel>,
    /// Bus count of the underlying network.
    pub node_count: usize,
    /// Grounded bus for slack models.
    pub ground: Option<usize>,
}

impl StateSpaceModel {
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// State index holding the voltage of bus `node`, if any.
    pub fn voltage_state(&self, node: usize) -> Option<usize> {
        self.state_labels.iter().position(|l| *l == StateLabel::Voltage(node))
    }
}

fn inv_sqrt_n(n: usize) -> f64 {
    1.0 / libm::sqrt(n as f64)
}

/// `A_ij = -M_ij / c_i`.
fn scale_rows_neg(m: &Matrix, c: &[f64]) -> Matrix {
    let mut a = m.clone();
    for (i, &ci) in c.iter().enumerate() {
        for v in a.row_mut(i) {
            *v = -*v / ci;
        }
    }
    a
}

pub fn assemble_slack(net: &Network, params: &ControllerParams, ground: usize) -> Result<StateSpaceModel> {
    params.validate()?;
    assemble_slack_with(net, &params.per_node(net.node_count()), ground)
}

pub fn assemble_slack_with(net: &Network, params: &NodeParams, ground: usize) -> Result<StateSpaceModel> {
    let n = net.node_count();
    params.validate(n)?;
    let reduced = reduced_laplacian(&laplacian(net), ground)?;
    debug_assert!(is_positive_definite(&reduced));
    let c: Vec<f64> = (0..n).filter(|&i| i != ground).map(|i| params.c[i]).collect();
    let m = n - 1;
    Ok(StateSpaceModel {
        kind: ModelKind::Slack,
        a: scale_rows_neg(&reduced, &c),
        b: Matrix::identity(m),
        h: Matrix::identity(m).scaled(inv_sqrt_n(n)),
        state_labels: (0..n).filter(|&i| i != ground).map(StateLabel::Voltage).collect(),
        node_count: n,
        ground: Some(ground),
    })
}

pub fn assemble_droop(net: &Network, params: &ControllerParams) -> Result<StateSpaceModel> {
    params.validate()?;
    assemble_droop_with(net, &params.per_node(net.node_count()))
}

pub fn assemble_droop_with(net: &Network, params: &NodeParams) -> Result<StateSpaceModel> {
    let n = net.node_count();
    params.validate(n)?;
    let m = laplacian(net).add(&Matrix::from_diagonal(&params.kp))?;
    Ok(StateSpaceModel {
        kind: ModelKind::Droop,
        a: scale_rows_neg(&m, &params.c),
        b: Matrix::identity(n),
        h: Matrix::identity(n).scaled(inv_sqrt_n(n)),
        state_labels: (0..n).map(StateLabel::Voltage).collect(),
        node_count: n,
        ground: None,
    })
}

pub fn assemble_dapi(net: &Network, params: &ControllerParams) -> Result<StateSpaceModel> {
    params.validate()?;
    assemble_dapi_with(net, &params.per_node(net.node_count()))
}

/// States are ordered `(z_0..z_n, V_0..V_n)`.
pub fn assemble_dapi_with(net: &Network, params: &NodeParams) -> Result<StateSpaceModel> {
    let n = net.node_count();
    params.validate(n)?;
    let l = laplacian(net);
    let lq = l.scaled(params.gamma);
    let droop = l.add(&Matrix::from_diagonal(&params.kp))?;

    let mut a = Matrix::zeros(2 * n, 2 * n);
    a.set_block(0, 0, &scale_rows_neg(&lq, &params.k));
    a.set_block(0, n, &Matrix::from_diagonal(&params.k.iter().map(|k| 1.0 / k).collect::<Vec<_>>()));
    a.set_block(n, 0, &Matrix::from_diagonal(&params.c.iter().map(|c| -1.0 / c).collect::<Vec<_>>()));
    a.set_block(n, n, &scale_rows_neg(&droop, &params.c));

    let mut b = Matrix::zeros(2 * n, n);
    b.set_block(n, 0, &Matrix::identity(n));
    let mut h = Matrix::zeros(n, 2 * n);
    h.set_block(0, n, &Matrix::identity(n).scaled(inv_sqrt_n(n)));

    let state_labels = (0..n).map(StateLabel::Integrator).chain((0..n).map(StateLabel::Voltage)).collect();
    Ok(StateSpaceModel { kind: ModelKind::Dapi, a, b, h, state_labels, node_count: n, ground: None })
}

pub fn assemble(net: &Network, params: &ControllerParams, kind: ModelKind, ground: usize) -> Result<StateSpaceModel> {
    match kind {
        ModelKind::Slack => assemble_slack(net, params, ground),
        ModelKind::Droop => assemble_droop(net, params),
        ModelKind::Dapi => assemble_dapi(net, params),
    }
}

/// Slack norm from the grounded-Laplacian spectrum.
pub fn slack_from_spectrum(reduced_eigs: &[f64], n: usize, c: f64) -> f64 {
    c / (2.0 * n as f64) * reduced_eigs.iter().map(|l| 1.0 / l).sum::<f64>()
}

/// Droop norm from the Laplacian spectrum.
pub fn droop_from_spectrum(eigs: &[f64], params: &ControllerParams) -> f64 {
    let n = eigs.len() as f64;
    params.c / (2.0 * n) * eigs.iter().map(|l| 1.0 / (l + params.kp)).sum::<f64>()
}

/// Per-mode DAPI denominator `λ + k_P + cγλ / (cγ²λ² + kγλ² + k k_P γλ + k)`.
pub fn dapi_mode_denominator(lambda: f64, p: &ControllerParams) -> f64 {
    let (c, k, kp, g) = (p.c, p.k, p.kp, p.gamma);
    let l2 = lambda * lambda;
    lambda + kp + c * g * lambda / (c * g * g * l2 + k * g * l2 + k * kp * g * lambda + k)
}

/// DAPI norm from the Laplacian spectrum.
pub fn dapi_from_spectrum(eigs: &[f64], params: &ControllerParams) -> f64 {
    let n = eigs.len() as f64;
    params.c / (2.0 * n) * eigs.iter().map(|&l| 1.0 / dapi_mode_denominator(l, params)).sum::<f64>()
}

pub fn h2_closed_form_slack(net: &Network, params: &ControllerParams, ground: usize) -> Result<f64> {
    params.validate()?;
    let reduced = reduced_laplacian(&laplacian(net), ground)?;
    Ok(slack_from_spectrum(&eigvals_sym(&reduced)?, net.node_count(), params.c))
}

pub fn h2_closed_form_droop(net: &Network, params: &ControllerParams) -> Result<f64> {
    params.validate()?;
    Ok(droop_from_spectrum(&eigvals_sym(&laplacian(net))?, params))
}

pub fn h2_closed_form_dapi(net: &Network, params: &ControllerParams) -> Result<f64> {
    params.validate()?;
    Ok(dapi_from_spectrum(&eigvals_sym(&laplacian(net))?, params))
}

/// `tr(Bᵀ P B)` with `AᵀP + PA = -HᵀH`, on the assembled model.
pub fn h2_lyapunov(model: &StateSpaceModel) -> Result<f64> {
    let dim = model.state_dim();
    if dim > LYAPUNOV_DIM_CAP {
        return Err(Error::DimensionCap { dim, cap: LYAPUNOV_DIM_CAP });
    }
    let q = model.h.tr_matmul(&model.h)?;
    let sol = solve_lyapunov(&model.a, &q)?;
    Ok(model.b.tr_matmul(&sol.p.matmul(&model.b)?)?.trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H2Method {
    ClosedForm,
    Lyapunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Values {
    pub slack: f64,
    pub droop: f64,
    pub dapi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingFlags {
    pub dapi_le_droop: bool,
    pub droop_lt_slack: bool,
}

/// Squared H2 norms of all three controllers on one network. The ordering
/// flags report what was observed; droop below slack does not hold for every
/// network and parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub n: usize,
    pub values: H2Values,
    pub method: H2Method,
    pub params: ControllerParams,
    pub ground: usize,
    pub ordering_flags: OrderingFlags,
}

impl H2Report {
    fn new(n: usize, values: H2Values, method: H2Method, params: ControllerParams, ground: usize) -> Self {
        let ordering_flags = OrderingFlags {
            dapi_le_droop: values.dapi <= values.droop,
            droop_lt_slack: values.droop < values.slack,
        };
        H2Report { n, values, method, params, ground, ordering_flags }
    }
}

pub fn compare_controllers(net: &Network, params: &ControllerParams, ground: usize) -> Result<H2Report> {
    params.validate()?;
    let l = laplacian(net);
    let eigs = eigvals_sym(&l)?;
    let reduced = eigvals_sym(&reduced_laplacian(&l, ground)?)?;
    let values = H2Values {
        slack: slack_from_spectrum(&reduced, net.node_count(), params.c),
        droop: droop_from_spectrum(&eigs, params),
        dapi: dapi_from_spectrum(&eigs, params),
    };
    Ok(H2Report::new(net.node_count(), values, H2Method::ClosedForm, *params, ground))
}

/// As [`compare_controllers`], but every value comes from the Lyapunov oracle.
pub fn compare_controllers_lyapunov(net: &Network, params: &ControllerParams, ground: usize) -> Result<H2Report> {
    let values = H2Values {
        slack: h2_lyapunov(&assemble_slack(net, params, ground)?)?,
        droop: h2_lyapunov(&assemble_droop(net, params)?)?,
        dapi: h2_lyapunov(&assemble_dapi(net, params)?)?,
    };
    Ok(H2Report::new(net.node_count(), values, H2Method::Lyapunov, *params, ground))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, generate_lattice};

    fn k2() -> Network {
        build_network(2, &[(0, 1, 1.0)]).unwrap()
    }

    fn p3() -> Network {
        build_network(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn params(c: f64, kp: f64, k: f64, gamma: f64) -> ControllerParams {
        ControllerParams::new(c, kp, k, gamma).unwrap()
    }

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!((got - want).abs() <= tol, "got {got}, want {want}");
    }

    #[test]
    fn params_validation() {
        assert_eq!(ControllerParams::new(0.0, 1.0, 1.0, 1.0), Err(Error::InvalidParams { name: "c", value: 0.0 }));
        assert!(ControllerParams::new(1.0, 1.0, 1.0, f64::INFINITY).is_err());
        let mut np = params(1.0, 1.0, 1.0, 1.0).per_node(3);
        assert!(np.uniform().is_ok());
        np.kp[2] = 2.0;
        assert_eq!(np.uniform(), Err(Error::NonUniformParams));
        assert!(np.validate(4).is_err());
    }

    #[test]
    fn slack_assembly() {
        let m = assemble_slack(&p3(), &params(1.0, 1.0, 1.0, 1.0), 0).unwrap();
        assert_eq!(m.a, mat(&[&[-2.0, 1.0], &[1.0, -1.0]]));
        assert_eq!(m.state_labels, vec![StateLabel::Voltage(1), StateLabel::Voltage(2)]);

        let m = assemble_slack(&k2(), &params(2.0, 1.0, 1.0, 1.0), 0).unwrap();
        assert_eq!(m.a, mat(&[&[-0.5]]));
        assert_eq!(m.b, mat(&[&[1.0]]));
        assert_close(m.h[(0, 0)], 1.0 / 2f64.sqrt(), 1e-15);
        assert!(assemble_slack(&k2(), &params(2.0, 1.0, 1.0, 1.0), 2).is_err());
    }

    #[test]
    fn droop_assembly() {
        let m = assemble_droop(&k2(), &params(2.0, 0.5, 1.0, 1.0)).unwrap();
        assert_eq!(m.a, mat(&[&[-0.75, 0.5], &[0.5, -0.75]]));
        let m = assemble_droop(&p3(), &params(1.0, 0.1, 1.0, 1.0)).unwrap();
        let want = laplacian(&p3()).add(&Matrix::identity(3).scaled(0.1)).unwrap().scaled(-1.0);
        assert!(m.a.sub(&want).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn dapi_assembly() {
        let m = assemble_dapi(&k2(), &params(1.0, 1.0, 1.0, 1.0)).unwrap();
        let want = mat(&[
            &[-1.0, 1.0, 1.0, 0.0],
            &[1.0, -1.0, 0.0, 1.0],
            &[-1.0, 0.0, -2.0, 1.0],
            &[0.0, -1.0, 1.0, -2.0],
        ]);
        assert_eq!(m.a, want);
        assert_eq!(
            m.state_labels,
            vec![StateLabel::Integrator(0), StateLabel::Integrator(1), StateLabel::Voltage(0), StateLabel::Voltage(1)]
        );
        assert_eq!(m.voltage_state(1), Some(3));
    }

    #[test]
    fn dapi_zero_mode_block() {
        // Restricting A to span{(1,0), (0,1)} ⊗ 1 gives [[0, 1/k], [-1/c, -k_P/c]].
        let (c, kp, k) = (2.0, 0.3, 5.0);
        let net = p3();
        let m = assemble_dapi(&net, &params(c, kp, k, 7.0)).unwrap();
        let n = net.node_count();
        let one = |block: usize| -> Vec<f64> {
            (0..2 * n).map(|i| if i / n == block { 1.0 } else { 0.0 }).collect()
        };
        let az = m.a.matvec(&one(0)).unwrap();
        let av = m.a.matvec(&one(1)).unwrap();
        for i in 0..n {
            assert_close(az[i], 0.0, 1e-15);
            assert_close(az[n + i], -1.0 / c, 1e-15);
            assert_close(av[i], 1.0 / k, 1e-15);
            assert_close(av[n + i], -kp / c, 1e-15);
        }
    }

    #[test]
    fn slack_closed_form_examples() {
        let p = params(1.0, 1.0, 1.0, 1.0);
        assert_close(h2_closed_form_slack(&p3(), &p, 0).unwrap(), 0.5, 1e-14);
        assert_close(h2_closed_form_slack(&k2(), &p, 0).unwrap(), 0.25, 1e-15);
        let path = generate_lattice(&[10], 1.0).unwrap();
        assert_close(h2_closed_form_slack(&path, &p, 0).unwrap(), 2.25, 1e-12);
    }

    #[test]
    fn droop_closed_form_examples() {
        assert_close(h2_closed_form_droop(&k2(), &params(1.0, 1.0, 1.0, 1.0)).unwrap(), 1.0 / 3.0, 1e-15);
        let v = h2_closed_form_droop(&p3(), &params(1.0, 0.1, 1.0, 1.0)).unwrap();
        assert_close(v, (10.0 + 1.0 / 1.1 + 1.0 / 3.1) / 6.0, 1e-13);
        assert_close(v, 1.871945, 1e-6);
    }

    #[test]
    fn dapi_closed_form_examples() {
        let v = h2_closed_form_dapi(&p3(), &params(1.0, 0.1, 100.0, 1000.0)).unwrap();
        assert_close(v, 1.871817, 1e-6);
        let v = h2_closed_form_dapi(&k2(), &params(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_close(v, 0.25 * (1.0 + 1.0 / (3.0 + 2.0 / 11.0)), 1e-14);
        let p = params(3.0, 0.7, 2.0, 5.0);
        assert_eq!(dapi_mode_denominator(0.0, &p), p.kp);
    }

    #[test]
    fn lyapunov_matches_small_examples() {
        let scalar = StateSpaceModel {
            kind: ModelKind::Droop,
            a: mat(&[&[-1.0]]),
            b: mat(&[&[1.0]]),
            h: mat(&[&[1.0]]),
            state_labels: vec![StateLabel::Voltage(0)],
            node_count: 1,
            ground: None,
        };
        assert_close(h2_lyapunov(&scalar).unwrap(), 0.5, 1e-15);
        let droop = assemble_droop(&p3(), &params(1.0, 0.1, 1.0, 1.0)).unwrap();
        assert_close(h2_lyapunov(&droop).unwrap(), 1.871945259042032, 1e-8);
        let slack = assemble_slack(&p3(), &params(1.0, 0.1, 1.0, 1.0), 0).unwrap();
        assert_close(h2_lyapunov(&slack).unwrap(), 0.5, 1e-8);
    }

    #[test]
    fn lyapunov_matches_closed_form_with_nonunit_capacitance() {
        let net = build_network(4, &[(0, 1, 0.5), (1, 2, 2.0), (2, 3, 1.0), (0, 2, 1.5)]).unwrap();
        let p = params(2.3, 0.7, 1.9, 3.1);
        let report = compare_controllers(&net, &p, 1).unwrap();
        let oracle = compare_controllers_lyapunov(&net, &p, 1).unwrap();
        assert_close(oracle.values.slack, report.values.slack, 1e-9 * report.values.slack);
        assert_close(oracle.values.droop, report.values.droop, 1e-9 * report.values.droop);
        assert_close(oracle.values.dapi, report.values.dapi, 1e-9 * report.values.dapi);
        assert_eq!(oracle.method, H2Method::Lyapunov);
    }

    #[test]
    fn heterogeneous_parameters_use_the_oracle() {
        let net = p3();
        let mut np = params(1.0, 0.5, 2.0, 3.0).per_node(3);
        np.c[1] = 2.0;
        np.k[2] = 4.0;
        assert_eq!(np.uniform(), Err(Error::NonUniformParams));
        for model in [
            assemble_slack_with(&net, &np, 0).unwrap(),
            assemble_droop_with(&net, &np).unwrap(),
            assemble_dapi_with(&net, &np).unwrap(),
        ] {
            let v = h2_lyapunov(&model).unwrap();
            assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn compare_examples() {
        let path = generate_lattice(&[10], 1.0).unwrap();
        let r = compare_controllers(&path, &params(1.0, 0.1, 100.0, 1000.0), 0).unwrap();
        assert_close(r.values.slack, 2.25, 1e-12);
        assert_close(r.values.droop, 1.02765, 1e-5);
        assert!(r.ordering_flags.dapi_le_droop && r.ordering_flags.droop_lt_slack);

        let r = compare_controllers(&p3(), &params(1.0, 0.1, 100.0, 1000.0), 0).unwrap();
        assert_close(r.values.droop, 1.871945, 1e-6);
        assert_close(r.values.slack, 0.5, 1e-12);
        assert!(r.ordering_flags.dapi_le_droop);
        assert!(!r.ordering_flags.droop_lt_slack);
    }

    #[test]
    fn lyapunov_oracle_dimension_cap() {
        let net = generate_lattice(&[31], 1.0).unwrap();
        let m = assemble_dapi(&net, &params(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(h2_lyapunov(&m), Err(Error::DimensionCap { dim: 62, cap: LYAPUNOV_DIM_CAP }));
    }
}
