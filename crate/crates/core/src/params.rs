//! System parameters: every physical constant of the transmitter/channel
//! model plus the simulation controls, with JSON config ingestion,
//! `key=value` overrides, validation, and derived geometry/channel constants.
//! All quantities are SI (m, s, mol/m³).

use std::path::Path;

use serde::Serialize;

use crate::error::{McError, Result};

/// Avogadro constant [1/mol], fixed.
pub const AVOGADRO: f64 = 6.02214076e23;

/// Full parameter set. Field names double as the JSON config keys and the
/// `--set` override keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    /// Integrator time step Δt [s].
    pub dt: f64,
    /// Transmitter (vesicle) radius [m].
    pub r_tx: f64,
    /// Receiver radius [m].
    pub r_rx: f64,
    /// Vesicle membrane thickness [m].
    pub d_mem: f64,
    /// Center-to-center TX–RX distance [m].
    pub d: f64,
    /// Signaling-molecule diffusion coefficient [m²/s].
    pub diff_sm: f64,
    /// Initial intravesicular H⁺ concentration [mol/m³].
    pub c_h_in_0: f64,
    /// Extravesicular H⁺ concentration, held constant [mol/m³].
    pub c_h_out_0: f64,
    /// Initial intravesicular SM concentration [mol/m³].
    pub c_sm_in_0: f64,
    /// Buffer dissociation constant [mol/m³].
    pub k_d: f64,
    /// Buffer molarity [mol/m³]; 0 disables buffering.
    pub c_buf: f64,
    /// Michaelis–Menten constant of the SM dependence [mol/m³].
    pub km: f64,
    /// Half-activation H⁺ concentration of the Hill term [mol/m³].
    pub km_h: f64,
    /// Hill coefficient, integer >= 1.
    pub hill_n: u32,
    /// H⁺ transported per SM released by the symporter.
    pub nu_sym: f64,
    /// Pump rate constant [mol/s].
    pub gamma_p: f64,
    /// Symporter H⁺ rate constant [mol/s].
    pub gamma_sym: f64,
    /// H⁺ membrane permeability times area [m³/s].
    pub gamma_l_h: f64,
    /// SM membrane permeability times area [m³/s].
    pub gamma_l_sm: f64,
    /// Bit duration [s].
    pub t_bit: f64,
    /// Guard interval for OOK-GI [s].
    pub t_guard: f64,
    /// Avogadro constant [1/mol].
    pub avogadro: f64,
}

impl Default for SystemParams {
    /// Table defaults. The leakage constants are permeabilities (3e-6 and
    /// 1e-12 m/s) times the default vesicle surface 4π·r_tx²; the buffered
    /// scenario (c_buf = 5) with T_b = 1 s and T_g = T_b/2 is the default
    /// operating point.
    fn default() -> Self {
        let r_tx = 60e-9;
        let area = 4.0 * std::f64::consts::PI * r_tx * r_tx;
        SystemParams {
            dt: 1e-5,
            r_tx,
            r_rx: 200e-9,
            d_mem: 14e-9,
            d: 2e-6,
            diff_sm: 9e-11,
            c_h_in_0: 3.98e-4,
            c_h_out_0: 3.98e-4,
            c_sm_in_0: 300.0,
            k_d: 6.2e-5,
            c_buf: 5.0,
            km: 1.3e-2,
            km_h: 5e-3,
            hill_n: 3,
            nu_sym: 3.0,
            gamma_p: 700.0 / AVOGADRO,
            gamma_sym: 1000.0 / AVOGADRO,
            gamma_l_h: 3e-6 * area,
            gamma_l_sm: 1e-12 * area,
            t_bit: 1.0,
            t_guard: 0.5,
            avogadro: AVOGADRO,
        }
    }
}

/// Accept a JSON number or a numeric string ("70e-9").
fn value_as_f64(v: &serde_json::Value) -> std::result::Result<f64, String> {
    match v {
        serde_json::Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| format!("number {n} is not representable as f64")),
        serde_json::Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("string {s:?} is not numeric")),
        other => Err(format!("expected a number or numeric string, got {other}")),
    }
}

impl SystemParams {
    /// Set one field by config key. Unknown keys are rejected; `hill_n`
    /// must be an integer >= 1. Does not re-validate the full set.
    pub fn set_field(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "dt" => self.dt = value,
            "r_tx" => self.r_tx = value,
            "r_rx" => self.r_rx = value,
            "d_mem" => self.d_mem = value,
            "d" => self.d = value,
            "diff_sm" => self.diff_sm = value,
            "c_h_in_0" => self.c_h_in_0 = value,
            "c_h_out_0" => self.c_h_out_0 = value,
            "c_sm_in_0" => self.c_sm_in_0 = value,
            "k_d" => self.k_d = value,
            "c_buf" => self.c_buf = value,
            "km" => self.km = value,
            "km_h" => self.km_h = value,
            "hill_n" => {
                if !(value.is_finite() && value >= 1.0 && value.fract() == 0.0) {
                    return Err(McError::Config(format!(
                        "key \"hill_n\": must be an integer >= 1, got {value}"
                    )));
                }
                self.hill_n = value as u32;
            }
            "nu_sym" => self.nu_sym = value,
            "gamma_p" => self.gamma_p = value,
            "gamma_sym" => self.gamma_sym = value,
            "gamma_l_h" => self.gamma_l_h = value,
            "gamma_l_sm" => self.gamma_l_sm = value,
            "t_bit" => self.t_bit = value,
            "t_guard" => self.t_guard = value,
            "avogadro" => self.avogadro = value,
            other => {
                return Err(McError::Config(format!("unknown key {other:?}")));
            }
        }
        Ok(())
    }

    /// Parse a JSON object; unspecified fields keep their defaults.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| McError::Config(format!("malformed JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| McError::Config("top level must be a JSON object".into()))?;
        let mut p = SystemParams::default();
        for (key, val) in obj {
            let x = value_as_f64(val)
                .map_err(|e| McError::Config(format!("key {key:?}: {e}")))?;
            p.set_field(key, x)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load_config(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            McError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    /// Check every model invariant; the message names the offending field.
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("dt", self.dt),
            ("r_tx", self.r_tx),
            ("r_rx", self.r_rx),
            ("d_mem", self.d_mem),
            ("d", self.d),
            ("diff_sm", self.diff_sm),
            ("c_h_in_0", self.c_h_in_0),
            ("c_h_out_0", self.c_h_out_0),
            ("c_sm_in_0", self.c_sm_in_0),
            ("k_d", self.k_d),
            ("km", self.km),
            ("km_h", self.km_h),
            ("nu_sym", self.nu_sym),
            ("t_bit", self.t_bit),
            ("avogadro", self.avogadro),
        ];
        for (name, v) in strictly_positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(McError::Validation(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        // Rate constants may be zero (degenerate transporters are meaningful
        // operating points: gamma_sym = 0 gives the pure-leakage equilibrium).
        let nonnegative = [
            ("c_buf", self.c_buf),
            ("t_guard", self.t_guard),
            ("gamma_p", self.gamma_p),
            ("gamma_sym", self.gamma_sym),
            ("gamma_l_h", self.gamma_l_h),
            ("gamma_l_sm", self.gamma_l_sm),
        ];
        for (name, v) in nonnegative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(McError::Validation(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if self.hill_n < 1 {
            return Err(McError::Validation(format!(
                "hill_n must be >= 1, got {}",
                self.hill_n
            )));
        }
        if self.dt > self.t_bit / 100.0 {
            return Err(McError::Validation(format!(
                "dt must satisfy dt <= t_bit/100, got dt = {} with t_bit = {}",
                self.dt, self.t_bit
            )));
        }
        if self.d <= self.r_rx + self.r_tx {
            return Err(McError::Validation(format!(
                "d must exceed r_rx + r_tx (non-overlapping TX and RX), got d = {} vs {}",
                self.d,
                self.r_rx + self.r_tx
            )));
        }
        if self.d_mem >= self.r_tx {
            return Err(McError::Validation(format!(
                "d_mem must be smaller than r_tx (positive inner radius), got d_mem = {} vs r_tx = {}",
                self.d_mem, self.r_tx
            )));
        }
        if self.t_guard >= self.t_bit {
            return Err(McError::Validation(format!(
                "t_guard must satisfy 0 <= t_guard < t_bit, got t_guard = {} with t_bit = {}",
                self.t_guard, self.t_bit
            )));
        }
        Ok(())
    }
}

/// Geometry and channel constants derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Intravesicular volume (4/3)π(r_tx − d_mem)³ [m³]: the membrane is
    /// excluded from the lumen.
    pub v_in: f64,
    /// Channel time constant (d − r_rx)/√(4·diff_sm) [s^½].
    pub alpha: f64,
    /// Asymptotic hitting probability r_rx/d.
    pub p_hit_inf: f64,
    /// Initial SM cargo c_sm_in_0·v_in·N_A [molecules].
    pub n_sm_total: f64,
}

/// Pure derivation; assumes `p` validated.
pub fn derive(p: &SystemParams) -> DerivedParams {
    let r_in = p.r_tx - p.d_mem;
    let v_in = 4.0 / 3.0 * std::f64::consts::PI * r_in * r_in * r_in;
    DerivedParams {
        v_in,
        alpha: (p.d - p.r_rx) / (4.0 * p.diff_sm).sqrt(),
        p_hit_inf: p.r_rx / p.d,
        n_sm_total: p.c_sm_in_0 * v_in * p.avogadro,
    }
}
