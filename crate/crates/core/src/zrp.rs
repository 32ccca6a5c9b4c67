//! The limiting zero range process: `k` piles fed by an infinite source at
//! the left and drained by a sink with a constant-rate clock at the right.
//!
//! Pile `i` pulls a particle from the nearest non-empty pile to its left
//! (the source when all are empty) at rate `theta (theta + Q_i)/(1 + Q_i)`;
//! the sink pulls from the nearest non-empty pile at rate
//! `theta (1 + sqrt t)/sqrt t` and the particle disappears. A sink ring
//! with every pile empty consumes a source particle and leaves the state
//! unchanged (still advancing the clock).

use rand::Rng;

use crate::asymptotics::{nb_pmf, NbParams};
use crate::rng::trial_rng;

/// Pile occupation numbers plus the simulation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct ZrpState {
    pub piles: Vec<u32>,
    pub clock: f64,
}

impl ZrpState {
    pub fn empty(k: usize) -> ZrpState {
        ZrpState {
            piles: vec![0; k],
            clock: 0.0,
        }
    }
}

/// Clock index: piles are `0..k`, the sink is `k`.
pub type Ringing = usize;

/// Rates of the `k` pile clocks followed by the sink clock.
pub fn zrp_rates(state: &ZrpState, theta: f64, t: f64) -> Vec<f64> {
    let mut rates: Vec<f64> = state
        .piles
        .iter()
        .map(|&q| theta * (theta + q as f64) / (1.0 + q as f64))
        .collect();
    rates.push(theta * (1.0 + t.sqrt()) / t.sqrt());
    rates
}

/// Applies the ring of clock `ringing`: a pile index pulls a particle from
/// the nearest non-empty pile to its left (source if none, which never
/// decrements); the sink index removes a particle from the nearest
/// non-empty pile (no-op if all are empty).
pub fn zrp_apply(state: &mut ZrpState, ringing: Ringing) {
    let k = state.piles.len();
    if ringing < k {
        if let Some(j) = (0..ringing).rev().find(|&j| state.piles[j] > 0) {
            state.piles[j] -= 1;
        }
        state.piles[ringing] += 1;
    } else {
        if let Some(j) = (0..k).rev().find(|&j| state.piles[j] > 0) {
            state.piles[j] -= 1;
        }
    }
}

/// Inverse-CDF draw from the stationary pile law.
pub fn sample_nb(params: &NbParams, rng: &mut impl Rng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut n = 0u32;
    loop {
        acc += nb_pmf(n, params);
        if u < acc || acc >= 1.0 - 1e-14 {
            return n;
        }
        n += 1;
    }
}

/// Stationary initial condition: i.i.d. piles from the negative-binomial
/// law with `p = sqrt(t)/(1 + sqrt(t))`.
pub fn sample_stationary_init(k: usize, theta: f64, t: f64, rng: &mut impl Rng) -> ZrpState {
    let params = NbParams::new(theta, t);
    ZrpState {
        piles: (0..k).map(|_| sample_nb(&params, rng)).collect(),
        clock: 0.0,
    }
}

/// Initial condition of a run.
#[derive(Debug, Clone)]
pub enum ZrpInit {
    Stationary,
    Given(Vec<u32>),
}

/// Piecewise-constant path: `states[i]` holds from `times[i]` on.
#[derive(Debug, Clone)]
pub struct ZrpPath {
    pub start: Vec<u32>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<u32>>,
    pub events: u64,
}

impl ZrpPath {
    pub fn at(&self, t: f64) -> &[u32] {
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => &self.states[i],
            Err(0) => &self.start,
            Err(i) => &self.states[i - 1],
        }
    }

    /// Number of events that changed pile `j` (1-based).
    pub fn change_count(&self, j: usize) -> u64 {
        let mut prev = self.start[j - 1];
        let mut count = 0;
        for s in &self.states {
            if s[j - 1] != prev {
                count += 1;
                prev = s[j - 1];
            }
        }
        count
    }
}

/// Exact event-driven path over `[0, horizon]`; deterministic in the seed.
pub fn simulate_zrp(
    k: usize,
    theta: f64,
    t: f64,
    horizon: f64,
    seed: u64,
    init: ZrpInit,
) -> ZrpPath {
    let mut rng = trial_rng(seed, 0);
    let mut state = match init {
        ZrpInit::Stationary => sample_stationary_init(k, theta, t, &mut rng),
        ZrpInit::Given(piles) => {
            assert_eq!(piles.len(), k);
            ZrpState { piles, clock: 0.0 }
        }
    };
    let mut path = ZrpPath {
        start: state.piles.clone(),
        times: Vec::new(),
        states: Vec::new(),
        events: 0,
    };
    loop {
        let rates = zrp_rates(&state, theta, t);
        let total: f64 = rates.iter().sum();
        let u: f64 = rng.random();
        let wait = -(1.0 - u).ln() / total;
        if state.clock + wait > horizon {
            break;
        }
        state.clock += wait;
        let mut pick: f64 = rng.random::<f64>() * total;
        let mut ringing = rates.len() - 1;
        for (i, &r) in rates.iter().enumerate() {
            if pick < r {
                ringing = i;
                break;
            }
            pick -= r;
        }
        zrp_apply(&mut state, ringing);
        path.events += 1;
        let changed = path
            .states
            .last()
            .map(|v| v != &state.piles)
            .unwrap_or(state.piles != path.start);
        if changed {
            path.times.push(state.clock);
            path.states.push(state.piles.clone());
        }
    }
    path
}
