use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite constrained MDP with a deterministic initial state.
///
/// `transition` is stored row-major as `[x][a][x']` and `cost` as `[x][a]`.
/// An unconstrained problem is expressed with `d0 = +inf`, which serializes
/// as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCmdp", into = "RawCmdp")]
pub struct TabularCmdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    cost: Vec<f64>,
    constraint_cost: Vec<f64>,
    gamma: f64,
    x0: usize,
    d0: f64,
}

#[derive(Serialize, Deserialize)]
struct RawCmdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    cost: Vec<f64>,
    constraint_cost: Vec<f64>,
    gamma: f64,
    x0: usize,
    d0: Option<f64>,
}

impl TryFrom<RawCmdp> for TabularCmdp {
    type Error = Error;

    fn try_from(raw: RawCmdp) -> Result<Self> {
        TabularCmdp::new(
            raw.n_states,
            raw.n_actions,
            raw.transition,
            raw.cost,
            raw.constraint_cost,
            raw.gamma,
            raw.x0,
            raw.d0.unwrap_or(f64::INFINITY),
        )
    }
}

impl From<TabularCmdp> for RawCmdp {
    fn from(m: TabularCmdp) -> Self {
        RawCmdp {
            n_states: m.n_states,
            n_actions: m.n_actions,
            transition: m.transition,
            cost: m.cost,
            constraint_cost: m.constraint_cost,
            gamma: m.gamma,
            x0: m.x0,
            d0: m.d0.is_finite().then_some(m.d0),
        }
    }
}

impl TabularCmdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        cost: Vec<f64>,
        constraint_cost: Vec<f64>,
        gamma: f64,
        x0: usize,
        d0: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel("need at least one state and one action".into()));
        }
        check_dim("transition", n_states * n_actions * n_states, transition.len())?;
        check_dim("cost", n_states * n_actions, cost.len())?;
        check_dim("constraint_cost", n_states, constraint_cost.len())?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidModel(format!("gamma = {gamma} must lie in [0, 1)")));
        }
        if x0 >= n_states {
            return Err(Error::InvalidModel(format!("x0 = {x0} out of range")));
        }
        if d0.is_nan() || d0 < 0.0 {
            return Err(Error::InvalidModel(format!("d0 = {d0} must be nonnegative")));
        }
        for (row, chunk) in transition.chunks(n_states).enumerate() {
            if chunk.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!("transition row {row} has a negative entry")));
            }
            let total: f64 = chunk.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "transition row {row} sums to {total}"
                )));
            }
        }
        if cost.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidModel("costs must be finite and nonnegative".into()));
        }
        if constraint_cost.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidModel(
                "constraint costs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            cost,
            constraint_cost,
            gamma,
            x0,
            d0,
        })
    }

    /// Random instance with dense transitions and costs drawn from `U[0, 1)`.
    /// The threshold is left unconstrained; callers set it with [`Self::with_d0`].
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, gamma: f64, rng: &mut R) -> Self {
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = row.iter().sum();
            transition.extend(row.iter().map(|p| p / total));
        }
        let cost = (0..n_states * n_actions).map(|_| rng.random::<f64>()).collect();
        let constraint_cost = (0..n_states).map(|_| rng.random::<f64>()).collect();
        Self::new(n_states, n_actions, transition, cost, constraint_cost, gamma, 0, f64::INFINITY)
            .expect("random instance is valid by construction")
    }

    pub fn with_d0(mut self, d0: f64) -> Self {
        assert!(d0 >= 0.0, "d0 must be nonnegative");
        self.d0 = d0;
        self
    }

    pub fn with_x0(mut self, x0: usize) -> Self {
        assert!(x0 < self.n_states);
        self.x0 = x0;
        self
    }

    /// Same dynamics with the constraint cost replaced.
    pub fn with_constraint_cost(&self, constraint_cost: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.transition.clone(),
            self.cost.clone(),
            constraint_cost,
            self.gamma,
            self.x0,
            self.d0,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn is_constrained(&self) -> bool {
        self.d0.is_finite()
    }

    #[inline]
    pub fn p(&self, x: usize, a: usize, next: usize) -> f64 {
        self.transition[(x * self.n_actions + a) * self.n_states + next]
    }

    /// Next-state distribution `P(·|x, a)`.
    #[inline]
    pub fn next_row(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn cost(&self, x: usize, a: usize) -> f64 {
        self.cost[x * self.n_actions + a]
    }

    #[inline]
    pub fn constraint_cost(&self, x: usize) -> f64 {
        self.constraint_cost[x]
    }

    pub fn cost_matrix(&self) -> &[f64] {
        &self.cost
    }

    pub fn constraint_costs(&self) -> &[f64] {
        &self.constraint_cost
    }

    /// The state-dependent constraint cost broadcast over actions, `h(x, a) = d(x)`.
    pub fn constraint_matrix(&self) -> Vec<f64> {
        (0..self.n_states)
            .flat_map(|x| std::iter::repeat_n(self.constraint_cost[x], self.n_actions))
            .collect()
    }

    pub fn c_max(&self) -> f64 {
        self.cost.iter().copied().fold(0.0, f64::max)
    }

    pub fn d_max(&self) -> f64 {
        self.constraint_cost.iter().copied().fold(0.0, f64::max)
    }

    /// A state where every action self-loops with zero cost and zero constraint cost.
    pub fn is_absorbing_free(&self, x: usize) -> bool {
        self.constraint_cost[x] == 0.0
            && (0..self.n_actions).all(|a| self.cost(x, a) == 0.0 && self.p(x, a, x) == 1.0)
    }
}

/// A Markov stationary policy `π(a|x)` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        check_dim("policy", n_states * n_actions, probs.len())?;
        for (x, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!("policy row {x} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!("policy row {x} sums to {total}")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn deterministic(n_actions: usize, choice: &[usize]) -> Self {
        let mut probs = vec![0.0; choice.len() * n_actions];
        for (x, &a) in choice.iter().enumerate() {
            assert!(a < n_actions);
            probs[x * n_actions + a] = 1.0;
        }
        Self {
            n_states: choice.len(),
            n_actions,
            probs,
        }
    }

    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let row: Vec<f64> = (0..n_actions).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|p| p / total));
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize) -> f64 {
        self.probs[x * self.n_actions + a]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn set_row(&mut self, x: usize, row: &[f64]) {
        self.probs[x * self.n_actions..(x + 1) * self.n_actions].copy_from_slice(row);
    }

    /// Largest per-state L1 distance to another policy.
    pub fn max_l1_distance(&self, other: &TabularPolicy) -> f64 {
        (0..self.n_states)
            .map(|x| {
                self.row(x)
                    .iter()
                    .zip(other.row(x))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_against(&self, cmdp: &TabularCmdp) -> Result<()> {
        check_dim("policy states", cmdp.n_states(), self.n_states)?;
        check_dim("policy actions", cmdp.n_actions(), self.n_actions)
    }
}
