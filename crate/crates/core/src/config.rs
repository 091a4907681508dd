//! TOML experiment configuration.
//!
//! ```toml
//! [code]
//! n_blocks = 8
//! block_len = 16
//!
//! [wavepacket]
//! sigma = 1.0
//! tau0 = 20.0
//! delta_tau = 5.0
//! delta = 1e-3
//!
//! [channel]
//! name = "rotate"      # ideal | rotate | jitter | collapse | absorbing | custom
//! theta = 0.39269908169872414
//! lambda = 0.8
//! d_tau = 8.0
//!
//! [run]
//! trials = 1000
//! seed = 7
//! ```
//!
//! A `custom` channel lists its modes explicitly; each mode is the reference
//! amplitude shifted by `shift`, with output polarizations given as
//! `[re(alpha), im(alpha), re(beta), im(beta)]`:
//!
//! ```toml
//! [[channel.modes]]
//! weight = 0.9
//! shift = 0.0
//! pol0 = [1.0, 0.0, 0.0, 0.0]
//! pol1 = [0.0, 0.0, 1.0, 0.0]
//! ```

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{builtin_channel, BuiltinChannel, ChannelMode, ChannelModel};
use crate::coding::BlockCode;
use crate::error::{Error, Result};
use crate::protocol::{ProtocolConfig, Seeds};
use crate::rng::{derive_path, STREAM_ALICE, STREAM_BOB};
use crate::siggrid::TauGrid;
use crate::states::{make_double_hump, PolarizationVector, WavepacketSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub code: CodeSection,
    pub wavepacket: WavepacketSection,
    pub channel: ChannelSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    pub n_blocks: usize,
    pub block_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSection {
    pub sigma: f64,
    pub tau0: f64,
    pub delta_tau: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Largest delay the grid must hold; defaults to `2 tau0`.
    pub max_delay: Option<f64>,
}

fn default_delta() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub name: String,
    /// Output localization window; defaults to `delta_tau + 3 sigma`.
    pub d_tau: Option<f64>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub shifts: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub modes: Option<Vec<ModeSection>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub weight: f64,
    #[serde(default)]
    pub shift: f64,
    pub pol0: [f64; 4],
    pub pol1: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_permutation")]
    pub permutation: bool,
    pub disclose_at: Option<f64>,
}

fn default_trials() -> u64 {
    1000
}

fn default_permutation() -> bool {
    true
}

impl Default for RunSection {
    fn default() -> Self {
        Self { trials: default_trials(), seed: 0, permutation: true, disclose_at: None }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn spec(&self) -> Result<WavepacketSpec> {
        let w = &self.wavepacket;
        WavepacketSpec::new(w.sigma, w.tau0, w.delta_tau, w.delta)
    }

    pub fn code(&self) -> Result<BlockCode> {
        BlockCode::new(self.code.n_blocks, self.code.block_len)
    }

    pub fn d_tau(&self) -> f64 {
        self.channel.d_tau.unwrap_or(self.wavepacket.delta_tau + 3.0 * self.wavepacket.sigma)
    }

    /// Grid that holds the honest state and every delay up to `max_delay`.
    pub fn grid(&self) -> Result<TauGrid> {
        let spec = self.spec()?;
        spec.default_grid(self.wavepacket.max_delay.unwrap_or(2.0 * spec.tau0))
    }

    /// The channel. Catalogue channels are validated on construction; custom
    /// ones are only structurally checked, so their report can be shown.
    pub fn channel_model(&self) -> Result<ChannelModel> {
        let spec = self.spec()?;
        let reference = make_double_hump(&spec, self.grid()?)?;
        let d_tau = self.d_tau();
        match self.builtin()? {
            Some(kind) => builtin_channel(&kind, &spec, &reference, d_tau),
            None => {
                let modes = self
                    .channel
                    .modes
                    .as_ref()
                    .filter(|m| !m.is_empty())
                    .ok_or_else(|| Error::Config("custom channel needs [[channel.modes]]".into()))?;
                let grid = reference.grid();
                let modes = modes
                    .iter()
                    .map(|m| {
                        let steps = grid
                            .steps_for(m.shift)
                            .ok_or_else(|| Error::Config(format!("mode shift {} is not a grid multiple", m.shift)))?;
                        Ok(ChannelMode {
                            weight: m.weight,
                            profile: reference.shifted(steps).normalized()?,
                            pol_out: [polarization(m.pol0)?, polarization(m.pol1)?],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ChannelModel::new("custom", reference, modes, d_tau)
            }
        }
    }

    fn builtin(&self) -> Result<Option<BuiltinChannel>> {
        let c = &self.channel;
        let need =
            |v: Option<f64>, what: &str| v.ok_or_else(|| Error::Config(format!("channel {} needs `{what}`", c.name)));
        Ok(Some(match c.name.as_str() {
            "ideal" => BuiltinChannel::Ideal,
            "rotate" => {
                BuiltinChannel::Rotate { theta: c.theta.unwrap_or(PI / 8.0), lambda: need(c.lambda, "lambda")? }
            }
            "collapse" => BuiltinChannel::Collapse { lambda: c.lambda.unwrap_or(1.0) },
            "absorbing" => BuiltinChannel::Absorbing,
            "jitter" => match (&c.shifts, &c.weights) {
                (Some(s), Some(w)) => BuiltinChannel::Jitter { shifts: s.clone(), weights: w.clone() },
                (None, None) => BuiltinChannel::default_jitter(&self.spec()?),
                _ => return Err(Error::Config("jitter needs both `shifts` and `weights`".into())),
            },
            "custom" => return Ok(None),
            other => return Err(Error::Config(format!("unknown channel `{other}`"))),
        }))
    }

    /// Protocol configuration with party seeds derived from the run seed.
    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        let mut pc = ProtocolConfig::new(self.code()?, self.spec()?, self.channel_model()?)?;
        pc.seeds = Seeds {
            alice: derive_path(self.run.seed, &[STREAM_ALICE]),
            bob: derive_path(self.run.seed, &[STREAM_BOB]),
        };
        pc.permutation_enabled = self.run.permutation;
        pc.disclose_at = self.run.disclose_at;
        pc.validate()?;
        Ok(pc)
    }
}

fn polarization(v: [f64; 4]) -> Result<PolarizationVector> {
    PolarizationVector::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
        .map_err(|e| Error::Config(format!("polarization {v:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::validate_channel;

    const BASE: &str = r#"
[code]
n_blocks = 2
block_len = 3

[wavepacket]
sigma = 1.0
tau0 = 20.0
delta_tau = 5.0
"#;

    fn with_channel(channel: &str) -> Config {
        Config::from_toml_str(&format!("{BASE}\n{channel}")).unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = with_channel("[channel]\nname = \"ideal\"");
        assert_eq!(c.run, RunSection::default());
        assert_eq!(c.d_tau(), 8.0);
        assert_eq!(c.wavepacket.delta, 1e-3);
        let g = c.grid().unwrap();
        assert!(g.t_max() >= 20.0 + 40.0 + 8.0 - 1e-9);
        let pc = c.protocol_config().unwrap();
        assert_eq!(pc.code.n_bits(), 6);
        assert!(pc.permutation_enabled);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = with_channel("[channel]\nname = \"rotate\"\ntheta = 0.5\nlambda = 0.8\n[run]\ntrials = 5\nseed = 9");
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn catalogue_names_build() {
        for ch in [
            "name = \"ideal\"",
            "name = \"rotate\"\nlambda = 0.8",
            "name = \"collapse\"",
            "name = \"absorbing\"",
            "name = \"jitter\"",
            "name = \"jitter\"\nshifts = [0.0, 2.0]\nweights = [0.6, 0.3]",
        ] {
            let c = with_channel(&format!("[channel]\n{ch}"));
            c.protocol_config().unwrap_or_else(|e| panic!("{ch}: {e}"));
        }
    }

    #[test]
    fn bad_configs() {
        assert!(matches!(Config::from_toml_str("nonsense ="), Err(Error::Config(_))));
        let c = with_channel("[channel]\nname = \"warp\"");
        assert!(matches!(c.channel_model(), Err(Error::Config(_))));
        let c = with_channel("[channel]\nname = \"rotate\"");
        assert!(matches!(c.channel_model(), Err(Error::Config(_))));
        let c = with_channel("[channel]\nname = \"custom\"");
        assert!(matches!(c.channel_model(), Err(Error::Config(_))));
        assert!(matches!(Config::load(Path::new("/nonexistent/x.toml")), Err(Error::Io(_))));
    }

    #[test]
    fn custom_modes() {
        let ok = with_channel(
            "[channel]\nname = \"custom\"\n[[channel.modes]]\nweight = 0.9\npol0 = [1.0, 0.0, 0.0, 0.0]\npol1 = [0.0, 0.0, 1.0, 0.0]",
        );
        let m = ok.channel_model().unwrap();
        assert!(validate_channel(&m, &ok.spec().unwrap()).all_passed());

        let early = with_channel(
            "[channel]\nname = \"custom\"\n[[channel.modes]]\nweight = 1.0\nshift = -3.0\npol0 = [1.0, 0.0, 0.0, 0.0]\npol1 = [0.0, 0.0, 1.0, 0.0]",
        );
        let m = early.channel_model().unwrap();
        let report = validate_channel(&m, &early.spec().unwrap());
        assert!(!report.check("causality").unwrap().passed);
        assert!(early.protocol_config().is_err());
    }
}
