//! Log-normal shadowing link model.
//!
//! The mean received margin follows a log-distance path loss law and is
//! anchored at zero on the transmission range, so a frame sent over exactly
//! `tx_range_m` is received half of the time. Every transmission redraws the
//! Gaussian shadowing term.
//!
//! Draws for a transmission come from a fixed position of the channel stream
//! keyed by link and slot, so two runs that attempt the same transmission
//! see the same outcome regardless of what else happened in between.

use rand::RngExt;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::metrics::NodeId;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub reference_distance_m: f64,
    /// Width of the logistic frame-success curve around zero margin.
    pub prr_transition_db: f64,
    /// Every link within reach delivers with probability one.
    pub lossless: bool,
    /// Fixed per-link reception ratios replacing the shadowing draw.
    pub link_prr: Vec<LinkPrrOverride>,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            path_loss_exponent: 3.0,
            shadowing_sigma_db: 14.0,
            reference_distance_m: 1.0,
            prr_transition_db: 1.0,
            lossless: false,
            link_prr: Vec::new(),
        }
    }
}

/// Symmetric fixed PRR between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkPrrOverride {
    pub a: NodeId,
    pub b: NodeId,
    pub prr: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub params: ChannelParams,
    pub tx_range_m: f64,
    shadowing: Option<Normal<f64>>,
    rng: SimRng,
}

impl ChannelModel {
    pub fn new(params: ChannelParams, tx_range_m: f64, rng: SimRng) -> ChannelModel {
        let shadowing = (params.shadowing_sigma_db > 0.0)
            .then(|| Normal::new(0.0, params.shadowing_sigma_db).expect("sigma validated"));
        ChannelModel { params, tx_range_m, shadowing, rng }
    }

    /// Links longer than this never deliver.
    pub fn reach_m(&self) -> f64 {
        2.0 * self.tx_range_m
    }

    /// Mean received margin above sensitivity at `distance_m`, in dB.
    pub fn mean_margin_db(&self, distance_m: f64) -> f64 {
        10.0 * self.params.path_loss_exponent * (self.tx_range_m / distance_m).log10()
    }

    /// Draws one shadowing sample and returns the resulting reception
    /// probability of a frame sent over `distance_m`.
    pub fn link_prr(&mut self, distance_m: f64) -> f64 {
        if distance_m > self.reach_m() {
            return 0.0;
        }
        if self.params.lossless {
            return 1.0;
        }
        let shadow = match &self.shadowing {
            Some(n) => n.sample(&mut self.rng),
            None => 0.0,
        };
        let margin = self.mean_margin_db(distance_m) + shadow;
        frame_success(margin, self.params.prr_transition_db)
    }

    /// [`Self::link_prr`] honoring per-link overrides.
    pub fn link_prr_between(&mut self, a: NodeId, b: NodeId, distance_m: f64) -> f64 {
        let fixed =
            self.params.link_prr.iter().find(|o| (o.a == a && o.b == b) || (o.a == b && o.b == a)).map(|o| o.prr);
        match fixed {
            Some(p) if distance_m <= self.reach_m() => p,
            Some(_) => 0.0,
            None => self.link_prr(distance_m),
        }
    }

    /// Samples whether one transmission from `a` to `b` in absolute slot
    /// `slot` succeeds.
    pub fn transmit(&mut self, a: NodeId, b: NodeId, distance_m: f64, slot: u64) -> bool {
        let key = (u128::from(slot) << 40) | (u128::from(a.0) << 20) | u128::from(b.0);
        self.rng.set_word_pos(key * WORDS_PER_DRAW);
        let prr = self.link_prr_between(a, b, distance_m);
        if prr >= 1.0 {
            true
        } else if prr <= 0.0 {
            false
        } else {
            self.rng.random_bool(prr)
        }
    }
}

/// Stream words reserved for one transmission.
const WORDS_PER_DRAW: u128 = 64;

fn frame_success(margin_db: f64, transition_db: f64) -> f64 {
    if transition_db <= 0.0 {
        return if margin_db >= 0.0 { 1.0 } else { 0.0 };
    }
    1.0 / (1.0 + (-margin_db / transition_db).exp())
}
