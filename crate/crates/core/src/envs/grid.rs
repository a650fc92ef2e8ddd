use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{episode_rng, Env, StepResult};
use crate::cmdp::TabularCmdp;
use crate::error::{Error, Result};

/// Samples trajectories from a tabular CMDP with one-hot observations.
///
/// Entering a zero-cost absorbing state ends the episode as terminal; reaching
/// the horizon ends it without the terminal flag.
#[derive(Debug, Clone)]
pub struct GridworldEnv {
    cmdp: TabularCmdp,
    horizon: usize,
    absorbing: Vec<bool>,
    state: usize,
    t: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl GridworldEnv {
    pub fn new(cmdp: TabularCmdp, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
        let absorbing = (0..ns)
            .map(|x| {
                cmdp.constraint_cost(x) == 0.0
                    && (0..na).all(|a| cmdp.cost(x, a) == 0.0 && cmdp.next_row(x, a)[x] == 1.0)
            })
            .collect();
        let x0 = cmdp.x0();
        Ok(Self {
            cmdp,
            horizon,
            absorbing,
            state: x0,
            t: 0,
            done: false,
            rng: episode_rng(0),
        })
    }

    pub fn cmdp(&self) -> &TabularCmdp {
        &self.cmdp
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn is_absorbing(&self, x: usize) -> bool {
        self.absorbing[x]
    }

    pub fn one_hot(&self, x: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.cmdp.n_states()];
        v[x] = 1.0;
        v
    }
}

/// Adapter with a 200-step horizon.
pub fn gridworld_env(cmdp: TabularCmdp) -> Result<GridworldEnv> {
    GridworldEnv::new(cmdp, 200)
}

impl Env for GridworldEnv {
    fn obs_dim(&self) -> usize {
        self.cmdp.n_states()
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn d0(&self) -> f64 {
        self.cmdp.d0()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = episode_rng(seed);
        self.state = self.cmdp.x0();
        self.t = 0;
        self.done = self.absorbing[self.state];
        self.one_hot(self.state)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let na = self.cmdp.n_actions();
        let a = action.first().copied().unwrap_or(0.0);
        if !(a >= 0.0 && (a as usize) < na && a.fract() == 0.0) {
            return Err(Error::InvalidArgument(format!("action {a} is not an index below {na}")));
        }
        let a = a as usize;
        let x = self.state;
        let cost = self.cmdp.cost(x, a);
        let constraint_cost = self.cmdp.constraint_cost(x);
        let u: f64 = self.rng.random();
        let row = self.cmdp.next_row(x, a);
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (y, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = y;
                break;
            }
        }
        self.state = next;
        self.t += 1;
        let terminal = self.absorbing[next];
        self.done = terminal || self.t >= self.horizon;
        Ok(StepResult {
            obs: self.one_hot(next),
            cost,
            constraint_cost,
            done: self.done,
            terminal,
        })
    }

    fn box_clone(&self) -> Box<dyn Env> {
        Box::new(self.clone())
    }
}

/// Six-state, two-action CMDP with a zero-cost absorbing goal (state 5) and
/// hazardous states 2 and 3. Action 1 is cheaper but tends to route through the hazards.
pub fn six_state_fixture() -> TabularCmdp {
    #[rustfmt::skip]
    let rows: [[[f64; 6]; 2]; 6] = [
        [[0.2, 0.8, 0.0, 0.0, 0.0, 0.0], [0.0, 0.3, 0.7, 0.0, 0.0, 0.0]],
        [[0.1, 0.3, 0.0, 0.0, 0.6, 0.0], [0.0, 0.2, 0.0, 0.8, 0.0, 0.0]],
        [[0.0, 0.5, 0.0, 0.0, 0.5, 0.0], [0.0, 0.0, 0.0, 0.6, 0.0, 0.4]],
        [[0.0, 0.0, 0.3, 0.0, 0.7, 0.0], [0.0, 0.0, 0.1, 0.0, 0.0, 0.9]],
        [[0.0, 0.0, 0.0, 0.0, 0.5, 0.5], [0.0, 0.0, 0.0, 0.2, 0.0, 0.8]],
        [[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]],
    ];
    let transition = rows.iter().flatten().flatten().copied().collect();
    let cost = vec![1.0, 0.4, 1.0, 0.3, 0.8, 0.2, 0.6, 0.1, 0.7, 0.5, 0.0, 0.0];
    let d = vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    TabularCmdp::new(6, 2, transition, cost, d, 0.9, 0, 1.0).expect("fixture is valid")
}
