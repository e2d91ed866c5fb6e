use std::collections::BTreeMap;

use rand::Rng;

use super::scenario::BusConfig;
use crate::protocol::{NodeId, ProtocolMessage};
use crate::rng::{stream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Delivered(u64),
    Dropped,
}

/// Latency and loss for one directed link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    pub latency_s: u64,
    pub drop_rate: f64,
}

/// Decides the fate of one message sent at `now` over a link.
pub fn deliver<R: Rng + ?Sized>(link: LinkParams, now: u64, rng: &mut R) -> Delivery {
    let dropped = if link.drop_rate >= 1.0 {
        true
    } else if link.drop_rate <= 0.0 {
        false
    } else {
        rng.random_bool(link.drop_rate)
    };
    if dropped {
        Delivery::Dropped
    } else {
        Delivery::Delivered(now + link.latency_s)
    }
}

/// Message bus with one RNG stream per directed node pair.
#[derive(Clone, Debug)]
pub struct Bus {
    config: BusConfig,
    seed: u64,
    streams: BTreeMap<(NodeId, NodeId), StreamRng>,
}

impl Bus {
    pub fn new(config: BusConfig, seed: u64) -> Self {
        Self {
            config,
            seed,
            streams: BTreeMap::new(),
        }
    }

    /// Parameters for `from -> to`; the last matching link override wins.
    pub fn link(&self, from: &NodeId, to: &NodeId) -> LinkParams {
        let mut params = LinkParams {
            latency_s: self.config.latency_s,
            drop_rate: self.config.drop_rate,
        };
        for link in &self.config.links {
            if link.from == from.kind() && link.to == to.kind() {
                if let Some(l) = link.latency_s {
                    params.latency_s = l;
                }
                if let Some(d) = link.drop_rate {
                    params.drop_rate = d;
                }
            }
        }
        params
    }

    pub fn send(&mut self, msg: &ProtocolMessage, now: u64) -> Delivery {
        let params = self.link(&msg.from, &msg.to);
        let seed = self.seed;
        let rng = self
            .streams
            .entry((msg.from.clone(), msg.to.clone()))
            .or_insert_with(|| stream(seed, &format!("bus:{}->{}", msg.from, msg.to)));
        deliver(params, now, rng)
    }
}
