use serde::{Deserialize, Serialize};

use super::{Activation, DelayFn, DelaySpec, ErrorPlant};
use crate::engine::Past;
use crate::error::SimError;

/// Network description as it appears in config files. Matrices are
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub n: usize,
    pub d: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "I", default)]
    pub input: Vec<f64>,
    pub activation: Activation,
    #[serde(rename = "Lf", default, skip_serializing_if = "Option::is_none")]
    pub lf: Option<f64>,
    #[serde(rename = "Lg", default, skip_serializing_if = "Option::is_none")]
    pub lg: Option<f64>,
    pub delay: DelaySpec,
}

/// Delayed Hopfield-type network
/// `ẋ_i = -d_i x_i + Σ_j a_ij f(x_j) + Σ_j b_ij g(x_j(t - τ_ij(t))) + I_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    n: usize,
    d: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    input: Vec<f64>,
    f: Activation,
    g: Activation,
    lf: f64,
    lg: f64,
    delay: DelayFn,
}

impl NeuralNet {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self, String> {
        let n = spec.n;
        if n == 0 {
            return Err("network needs at least one neuron".into());
        }
        if spec.d.len() != n {
            return Err(format!("d has {} entries, expected {n}", spec.d.len()));
        }
        if spec.d.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err("self-decay rates d must be positive".into());
        }
        for (name, m) in [("A", &spec.a), ("B", &spec.b)] {
            if m.len() != n * n {
                return Err(format!("{name} has {} entries, expected {}", m.len(), n * n));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(format!("{name} has non-finite entries"));
            }
        }
        let input = if spec.input.is_empty() {
            vec![0.0; n]
        } else {
            spec.input.clone()
        };
        if input.len() != n {
            return Err(format!("I has {} entries, expected {n}", input.len()));
        }
        let lf = spec.lf.unwrap_or(spec.activation.lipschitz());
        let lg = spec.lg.unwrap_or(spec.activation.lipschitz());
        if !(lf >= 0.0 && lg >= 0.0) {
            return Err("Lipschitz constants must be nonnegative".into());
        }
        let net = Self {
            n,
            d: spec.d.clone(),
            a: spec.a.clone(),
            b: spec.b.clone(),
            input,
            f: spec.activation,
            g: spec.activation,
            lf,
            lg,
            delay: spec.delay.compile()?,
        };
        if let Some((x, y)) = net.lipschitz_violation() {
            return Err(format!("activation is not {lf}-Lipschitz between {x} and {y}"));
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delay(&self) -> &DelayFn {
        &self.delay
    }

    pub fn delay_bound(&self) -> f64 {
        self.delay.bound()
    }

    pub fn activation(&self, x: f64) -> f64 {
        self.f.apply(x)
    }

    fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.n + j]
    }

    /// Spot-checks both activations against their declared Lipschitz
    /// constants on a fixed grid of pairs; returns the first offending pair.
    pub fn lipschitz_violation(&self) -> Option<(f64, f64)> {
        let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.137).collect();
        for &x in &grid {
            for &y in &grid {
                let tol = 1e-12 * (1.0 + x.abs() + y.abs());
                let dx = (x - y).abs();
                if (self.f.apply(x) - self.f.apply(y)).abs() > self.lf * dx + tol
                    || (self.g.apply(x) - self.g.apply(y)).abs() > self.lg * dx + tol
                {
                    return Some((x, y));
                }
            }
        }
        None
    }

    /// Writes the right-hand side for the copy stored at `offset` in the
    /// state, leaving `u` out.
    fn rhs(&self, past: &Past<'_>, offset: usize, taus: &[f64], out: &mut [f64]) -> Result<(), SimError> {
        let n = self.n;
        let t = past.time();
        let z = &past.state()[offset..offset + n];
        for i in 0..n {
            let mut acc = -self.d[i] * z[i] + self.input[i];
            for j in 0..n {
                acc += self.a(i, j) * self.f.apply(z[j]);
                let delayed = past.value(offset + j, t - taus[i * n + j])?;
                acc += self.b(i, j) * self.g.apply(delayed);
            }
            out[i] = acc;
        }
        Ok(())
    }

    fn delays(&self, t: f64) -> Result<Vec<f64>, SimError> {
        let n = self.n;
        let mut taus = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                taus.push(self.delay.eval(i + 1, j + 1, t)?);
            }
        }
        Ok(taus)
    }
}

/// Growth bounds of the error comparison system:
/// `α1 = max_i(-d_i + L_f Σ_j |a_ij|)` and `α2 = L_g max_i Σ_j |b_ij|`.
pub fn derive_alpha12(net: &NeuralNet) -> (f64, f64) {
    let n = net.n;
    let row = |m: &[f64], i: usize| m[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>();
    let alpha1 = (0..n)
        .map(|i| -net.d[i] + net.lf * row(&net.a, i))
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha2 = net.lg * (0..n).map(|i| row(&net.b, i)).fold(0.0, f64::max);
    (alpha1, alpha2)
}

/// Spec of the three-neuron chaotic reference network.
pub fn reference_network_spec() -> NetworkSpec {
    NetworkSpec {
        n: 3,
        d: vec![1.0; 3],
        a: vec![1.25, -3.2, -3.2, -3.2, 1.1, -4.4, -3.2, 4.4, 1.0],
        b: vec![0.02; 9],
        input: vec![0.0; 3],
        activation: Activation::Saturation,
        lf: Some(1.0),
        lg: Some(1.0),
        delay: DelaySpec::Reference,
    }
}

/// The three-neuron chaotic reference network.
pub fn paper_nn() -> NeuralNet {
    NeuralNet::from_spec(&reference_network_spec()).expect("reference network is valid")
}

/// Master and controlled slave copies integrated together; the state is
/// `[x, y]` and the error is `y - x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterSlavePair {
    net: NeuralNet,
    master_init: Vec<f64>,
    slave_init: Vec<f64>,
}

impl MasterSlavePair {
    pub fn new(net: NeuralNet, master_init: Vec<f64>, slave_init: Vec<f64>) -> Result<Self, String> {
        if master_init.len() != net.n || slave_init.len() != net.n {
            return Err(format!("initial states must have {} components", net.n));
        }
        Ok(Self {
            net,
            master_init,
            slave_init,
        })
    }

    pub fn net(&self) -> &NeuralNet {
        &self.net
    }
}

/// Error dynamics `ė = ẏ - ẋ` of the pair under control `u`, evaluated from
/// the coupled state in `past`.
pub fn nn_error_rhs(pair: &MasterSlavePair, past: &Past<'_>, u: &[f64], out: &mut [f64]) -> Result<(), SimError> {
    let n = pair.net.n;
    let mut deriv = vec![0.0; 2 * n];
    pair.drift(past, &mut deriv)?;
    pair.inject(u, &mut deriv);
    pair.error_rate(&deriv, out);
    Ok(())
}

impl ErrorPlant for MasterSlavePair {
    fn state_dim(&self) -> usize {
        2 * self.net.n
    }

    fn error_dim(&self) -> usize {
        self.net.n
    }

    fn delay_bound(&self) -> f64 {
        self.net.delay_bound()
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut s = self.master_init.clone();
        s.extend_from_slice(&self.slave_init);
        s
    }

    fn drift(&self, past: &Past<'_>, out: &mut [f64]) -> Result<(), SimError> {
        let n = self.net.n;
        let taus = self.net.delays(past.time())?;
        let (master, slave) = out[..2 * n].split_at_mut(n);
        self.net.rhs(past, 0, &taus, master)?;
        self.net.rhs(past, n, &taus, slave)
    }

    fn error(&self, state: &[f64], out: &mut [f64]) {
        let n = self.net.n;
        for i in 0..n {
            out[i] = state[n + i] - state[i];
        }
    }

    fn inject(&self, u: &[f64], deriv: &mut [f64]) {
        let n = self.net.n;
        for i in 0..n {
            deriv[n + i] += u[i];
        }
    }

    fn error_rate(&self, deriv: &[f64], out: &mut [f64]) {
        self.error(deriv, out);
    }

    fn clamp_error(&self, state: &mut [f64], i: usize) {
        state[self.net.n + i] = state[i];
    }
}

/// The master network alone; its state is reported as the monitored signal.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterOnly {
    net: NeuralNet,
    init: Vec<f64>,
}

impl MasterOnly {
    pub fn new(net: NeuralNet, init: Vec<f64>) -> Result<Self, String> {
        if init.len() != net.n {
            return Err(format!("initial state must have {} components", net.n));
        }
        Ok(Self { net, init })
    }
}

impl ErrorPlant for MasterOnly {
    fn state_dim(&self) -> usize {
        self.net.n
    }

    fn error_dim(&self) -> usize {
        self.net.n
    }

    fn delay_bound(&self) -> f64 {
        self.net.delay_bound()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn drift(&self, past: &Past<'_>, out: &mut [f64]) -> Result<(), SimError> {
        let taus = self.net.delays(past.time())?;
        self.net.rhs(past, 0, &taus, &mut out[..self.net.n])
    }

    fn error(&self, state: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&state[..self.net.n]);
    }

    fn inject(&self, u: &[f64], deriv: &mut [f64]) {
        for (d, ui) in deriv.iter_mut().zip(u) {
            *d += ui;
        }
    }

    fn error_rate(&self, deriv: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&deriv[..self.net.n]);
    }

    fn clamp_error(&self, state: &mut [f64], i: usize) {
        state[i] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::HistoryBuffer;

    fn spec_2x2() -> NetworkSpec {
        NetworkSpec {
            n: 2,
            d: vec![1.0, 2.0],
            a: vec![1.0, -1.0, 0.0, 3.0],
            b: vec![0.5, 0.0, 0.0, 0.5],
            input: vec![],
            activation: Activation::Identity,
            lf: Some(2.0),
            lg: Some(3.0),
            delay: DelaySpec::Constant { value: 0.1 },
        }
    }

    #[test]
    fn reference_bounds() {
        let net = paper_nn();
        let (a1, a2) = derive_alpha12(&net);
        // the row sum 3.2 + 1.1 + 4.4 is not representable; one ulp of slack
        assert!((a1 - 7.7).abs() <= 4.0 * f64::EPSILON * 7.7, "{a1}");
        assert_eq!(a2, 0.06);
        let n = net.n();
        let rows: Vec<f64> = (0..n).map(|i| (0..n).map(|j| net.a(i, j).abs()).sum()).collect();
        for (r, want) in rows.iter().zip([7.65, 8.7, 8.6]) {
            assert!((r - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_computed_bounds() {
        let net = NeuralNet::from_spec(&spec_2x2()).unwrap();
        assert_eq!(derive_alpha12(&net), (4.0, 1.5));
        let mut s = spec_2x2();
        s.a = vec![0.0; 4];
        s.b = vec![0.0; 4];
        s.d = vec![3.0, 3.0];
        s.lf = None;
        s.lg = None;
        assert_eq!(derive_alpha12(&NeuralNet::from_spec(&s).unwrap()), (-3.0, 0.0));
    }

    #[test]
    fn bounds_invariant_under_row_permutation() {
        let base = spec_2x2();
        let mut p = base.clone();
        p.d.swap(0, 1);
        p.a = vec![base.a[2], base.a[3], base.a[0], base.a[1]];
        p.b = vec![base.b[2], base.b[3], base.b[0], base.b[1]];
        let a = derive_alpha12(&NeuralNet::from_spec(&base).unwrap());
        let b = derive_alpha12(&NeuralNet::from_spec(&p).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = spec_2x2();
        s.d = vec![1.0, 0.0];
        assert!(NeuralNet::from_spec(&s).is_err());
        let mut s = spec_2x2();
        s.a.pop();
        assert!(NeuralNet::from_spec(&s).is_err());
        let mut s = spec_2x2();
        s.activation = Activation::Tanh;
        s.lf = Some(0.5);
        assert!(NeuralNet::from_spec(&s).is_err());
    }

    #[test]
    fn synchronized_manifold_has_zero_error_rate() {
        let pair = MasterSlavePair::new(paper_nn(), vec![0.3, -0.2, 0.9], vec![0.3, -0.2, 0.9]).unwrap();
        let init = pair.initial_state();
        let h = HistoryBuffer::new(&init, 0.0, 1.0);
        let mut out = [1.0; 3];
        nn_error_rhs(&pair, &Past::new(&h, 0.0, &init), &[0.0; 3], &mut out).unwrap();
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn error_rhs_matches_error_form() {
        // ė_i = -d_i e_i + Σ a_ij (f(y_j) - f(x_j)) + Σ b_ij (g(y_j(t-τ)) - g(x_j(t-τ))) + u_i
        let net = paper_nn();
        let pair = MasterSlavePair::new(net.clone(), vec![0.05, -0.1, 0.15], vec![-1.5, 0.8, -0.1]).unwrap();
        let mut h = HistoryBuffer::new(&pair.initial_state(), 0.0, 2.0);
        for k in 1..=200 {
            let t = k as f64 * 0.01;
            let s: Vec<f64> = (0..6).map(|c| (t * (c + 1) as f64).sin() * 1.7).collect();
            h.push(t, &s, 0.0);
        }
        let t = 2.0;
        let state: Vec<f64> = (0..6).map(|c| (t * (c + 1) as f64).sin() * 1.7 + 0.01).collect();
        let past = Past::new(&h, t, &state);
        let u = [0.3, -0.2, 0.1];
        let mut got = [0.0; 3];
        nn_error_rhs(&pair, &past, &u, &mut got).unwrap();
        let f = |x: f64| ((x + 1.0).abs() - (x - 1.0).abs()) / 2.0;
        for i in 0..3 {
            let e_i = state[3 + i] - state[i];
            let mut want = -e_i + u[i];
            for j in 0..3 {
                let tau = 0.4 + 0.1 * (((i + 1) + 2 * (j + 1)) as f64 * t).sin();
                let (xd, yd) = (past.value(j, t - tau).unwrap(), past.value(3 + j, t - tau).unwrap());
                want += net.a(i, j) * (f(state[3 + j]) - f(state[j])) + 0.02 * (f(yd) - f(xd));
            }
            assert!((got[i] - want).abs() < 1e-12, "{i}: {} vs {want}", got[i]);
        }
    }

    #[test]
    fn clamp_sets_slave_to_master() {
        let pair = MasterSlavePair::new(paper_nn(), vec![1.0, 2.0, 3.0], vec![0.0; 3]).unwrap();
        let mut s = pair.initial_state();
        pair.clamp_error(&mut s, 1);
        let mut e = [0.0; 3];
        pair.error(&s, &mut e);
        assert_eq!(e, [-1.0, 0.0, -3.0]);
    }

    #[test]
    fn spec_from_toml() {
        let text = r#"
            n = 2
            d = [1.0, 2.0]
            A = [1.0, -1.0, 0.0, 3.0]
            B = [0.5, 0.0, 0.0, 0.5]
            activation = "tanh"
            delay = { kind = "constant", value = 0.2 }
        "#;
        let s: NetworkSpec = toml::from_str(text).unwrap();
        let net = NeuralNet::from_spec(&s).unwrap();
        assert_eq!(net.delay_bound(), 0.2);
        assert_eq!(derive_alpha12(&net), (1.0, 0.5));
    }
}
