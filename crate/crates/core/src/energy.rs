//! Operation counting and energy estimation for spiking layers, plus spike
//! density.
//!
//! Synaptic operations driven by binary spikes are accumulates (AC); neuronal
//! state updates are multiply-accumulates (MAC). Per-layer costs:
//!
//! | model      | AC              | MAC            |
//! |------------|-----------------|----------------|
//! | LIF        | h m t Fr_in     | m t            |
//! | PSN        | h m t Fr_in     | m t^2          |
//! | masked PSN | h m t Fr_in     | k m t          |
//! | SPSN       | h m t Fr_in     | k m t          |
//! | PMSN       | h m t Fr_in     | 8 (n - 1) m t  |
//!
//! Counts are exact: the firing rate is carried as a spike/entry ratio and
//! the AC count as a rational number.

use alloc::format;

use crate::error::{invalid, Result};

/// Energy per operation, in femtojoules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyModel {
    pub e_ac_fj: u64,
    pub e_mac_fj: u64,
}

impl Default for EnergyModel {
    /// 0.9 pJ per AC and 4.6 pJ per MAC.
    fn default() -> Self {
        EnergyModel {
            e_ac_fj: 900,
            e_mac_fj: 4600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lif,
    Pmsn { compartments: u64 },
    Psn,
    MaskedPsn { k: u64 },
    Spsn { k: u64 },
}

impl ModelKind {
    /// Parses `lif`, `pmsn:<n>`, `psn`, `masked-psn:<k>` or `spsn:<k>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<u64> {
            arg.and_then(|a| a.trim().parse::<u64>().ok())
                .ok_or_else(|| invalid(format!("model kind `{s}` needs an integer {what}")))
        };
        let kind = match (name.trim().to_ascii_lowercase().as_str(), arg) {
            ("lif", None) => ModelKind::Lif,
            ("psn", None) => ModelKind::Psn,
            ("pmsn", _) => ModelKind::Pmsn {
                compartments: num("compartment count")?,
            },
            ("masked-psn", _) => ModelKind::MaskedPsn { k: num("window")? },
            ("spsn", _) => ModelKind::Spsn { k: num("window")? },
            _ => return Err(invalid(format!("unknown model kind `{s}`"))),
        };
        if let ModelKind::Pmsn { compartments: 0 } = kind {
            return Err(invalid("PMSN needs at least one compartment"));
        }
        Ok(kind)
    }

    /// MAC count of one layer of `m` neurons over `t` steps.
    pub fn mac_count(self, m: u64, t: u64) -> u128 {
        let (m, t) = (m as u128, t as u128);
        match self {
            ModelKind::Lif => m * t,
            ModelKind::Psn => m * t * t,
            ModelKind::MaskedPsn { k } | ModelKind::Spsn { k } => k as u128 * m * t,
            ModelKind::Pmsn { compartments } => 8 * (compartments as u128 - 1) * m * t,
        }
    }
}

/// Presynaptic firing rate as an exact ratio `spikes / entries`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rate {
    pub spikes: u64,
    pub entries: u64,
}

impl Rate {
    pub fn new(spikes: u64, entries: u64) -> Result<Self> {
        if entries == 0 || spikes > entries {
            return Err(invalid(
                "firing rate must be a ratio in [0, 1] with a positive denominator",
            ));
        }
        Ok(Rate { spikes, entries })
    }

    pub fn as_f64(self) -> f64 {
        self.spikes as f64 / self.entries as f64
    }
}

/// Shape and measured input rate of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerStats {
    /// Input dimension.
    pub h: u64,
    /// Neuron count.
    pub m: u64,
    /// Time steps.
    pub t: u64,
    pub fr_in: Rate,
}

/// Operation counts and energy of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// AC count as the exact fraction `ac_num / ac_den`.
    pub ac_num: u128,
    pub ac_den: u128,
    pub mac_count: u128,
    /// Energy in femtojoules as the exact fraction `fj_num / ac_den`.
    pub fj_num: u128,
}

impl EnergyReport {
    pub fn ac_count(&self) -> f64 {
        self.ac_num as f64 / self.ac_den as f64
    }

    pub fn picojoules(&self) -> f64 {
        self.fj_num as f64 / self.ac_den as f64 / 1000.0
    }

    /// Energy in femtojoules when it is a whole number.
    pub fn femtojoules_exact(&self) -> Option<u128> {
        (self.fj_num % self.ac_den == 0).then(|| self.fj_num / self.ac_den)
    }
}

/// Evaluates the per-layer cost formula of `kind`.
pub fn energy_estimate(stats: &LayerStats, kind: ModelKind, model: &EnergyModel) -> Result<EnergyReport> {
    if stats.fr_in.entries == 0 || stats.fr_in.spikes > stats.fr_in.entries {
        return Err(invalid("firing rate must lie in [0, 1]"));
    }
    let hmt = stats.h as u128 * stats.m as u128 * stats.t as u128;
    let ac_num = hmt * stats.fr_in.spikes as u128;
    let ac_den = stats.fr_in.entries as u128;
    let mac_count = kind.mac_count(stats.m, stats.t);
    let fj_num = model.e_ac_fj as u128 * ac_num + model.e_mac_fj as u128 * mac_count * ac_den;
    Ok(EnergyReport {
        ac_num,
        ac_den,
        mac_count,
        fj_num,
    })
}

/// Spikes per neuron per time step; 0 for an empty run.
pub fn spike_density(spikes: u64, neurons: u64, steps: u64, batch: u64) -> f64 {
    let denom = neurons as u128 * steps as u128 * batch as u128;
    if denom == 0 {
        0.0
    } else {
        spikes as f64 / denom as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(fr: Rate) -> LayerStats {
        LayerStats {
            h: 100,
            m: 64,
            t: 784,
            fr_in: fr,
        }
    }

    #[test]
    fn lif_row() {
        let r = energy_estimate(
            &stats(Rate::new(1, 10).unwrap()),
            ModelKind::Lif,
            &EnergyModel::default(),
        )
        .unwrap();
        assert_eq!(r.mac_count, 64 * 784);
        assert_eq!(r.ac_num / r.ac_den, 501_760);
        // 451,584 pJ + 230,809.6 pJ.
        assert_eq!(r.femtojoules_exact(), Some(682_393_600));
        assert!((r.picojoules() - 682_393.6).abs() < 1e-6);
    }

    #[test]
    fn pmsn_row() {
        let r = energy_estimate(
            &stats(Rate::new(1, 10).unwrap()),
            ModelKind::Pmsn { compartments: 5 },
            &EnergyModel::default(),
        )
        .unwrap();
        assert_eq!(r.mac_count, 8 * 4 * 64 * 784);
        assert_eq!(r.femtojoules_exact(), Some(451_584_000 + 7_385_907_200));
        assert!((r.picojoules() / 1e6 - 7.84).abs() < 0.005);
    }

    #[test]
    fn psn_family_rows() {
        let e = EnergyModel::default();
        let s = stats(Rate::new(0, 1).unwrap());
        assert_eq!(
            energy_estimate(&s, ModelKind::Psn, &e).unwrap().mac_count,
            64 * 784 * 784
        );
        assert_eq!(
            energy_estimate(&s, ModelKind::MaskedPsn { k: 4 }, &e)
                .unwrap()
                .mac_count,
            4 * 64 * 784
        );
        assert_eq!(
            energy_estimate(&s, ModelKind::Spsn { k: 8 }, &e).unwrap().mac_count,
            8 * 64 * 784
        );
    }

    #[test]
    fn zero_rate_has_no_ac_energy() {
        let r = energy_estimate(
            &stats(Rate::new(0, 7).unwrap()),
            ModelKind::Lif,
            &EnergyModel::default(),
        )
        .unwrap();
        assert_eq!(r.ac_num, 0);
        assert_eq!(r.femtojoules_exact(), Some(4600 * 64 * 784));
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(ModelKind::parse("lif").unwrap(), ModelKind::Lif);
        assert_eq!(ModelKind::parse("pmsn:5").unwrap(), ModelKind::Pmsn { compartments: 5 });
        assert_eq!(ModelKind::parse("masked-psn:3").unwrap(), ModelKind::MaskedPsn { k: 3 });
        assert!(matches!(
            ModelKind::parse("resonate"),
            Err(crate::Error::InvalidArgument(_))
        ));
        assert!(ModelKind::parse("pmsn").is_err());
    }

    #[test]
    fn density_extremes() {
        assert_eq!(spike_density(0, 10, 20, 3), 0.0);
        assert_eq!(spike_density(600, 10, 20, 3), 1.0);
        assert_eq!(spike_density(0, 0, 0, 0), 0.0);
    }
}
