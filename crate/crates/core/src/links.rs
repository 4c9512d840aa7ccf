//! RF and FSO link budgets, data rates and end-to-end transfer delays.
//!
//! The closed forms follow the usual conventions: powers are configured in
//! dBm, antenna gains in dBi, and converted to linear units internally.
//! Every function is a deterministic pure function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::PhysicalConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("invalid link parameter: {0}")]
    InvalidParameter(String),
    #[error("data rate is zero; the link cannot carry a payload")]
    ZeroRate,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn check_distance(d: f64) -> Result<(), LinkError> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(LinkError::NonPositiveDistance(d))
    }
}

/// RF link parameters. Defaults follow the comparison setup: 40 dBm
/// transmit power, 6.98 dBi at both ends, 2.4 GHz carrier and 354.81 K
/// noise temperature; the 1 MHz bandwidth is a documented choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RfLinkParams {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub noise_temperature_k: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
}

impl Default for RfLinkParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 40.0,
            tx_gain_dbi: 6.98,
            rx_gain_dbi: 6.98,
            noise_temperature_k: 354.81,
            bandwidth_hz: 1.0e6,
            carrier_hz: 2.4e9,
        }
    }
}

impl RfLinkParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |what: &str, v: f64| {
            Err(LinkError::InvalidParameter(format!("rf.{what} must be positive, got {v}")))
        };
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz", self.bandwidth_hz);
        }
        if !(self.carrier_hz > 0.0) {
            return bad("carrier_hz", self.carrier_hz);
        }
        if !(self.noise_temperature_k > 0.0) {
            return bad("noise_temperature_k", self.noise_temperature_k);
        }
        if ![self.tx_power_dbm, self.tx_gain_dbi, self.rx_gain_dbi]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(LinkError::InvalidParameter("rf power/gain must be finite".into()));
        }
        Ok(())
    }
}

/// Free-space path loss as a linear factor, `(4π d f / c)²`.
pub fn free_space_path_loss(
    distance_m: f64,
    carrier_hz: f64,
    consts: &PhysicalConstants,
) -> Result<f64, LinkError> {
    check_distance(distance_m)?;
    let x = 4.0 * PI * distance_m * carrier_hz / consts.speed_of_light_m_s;
    Ok(x * x)
}

/// Free-space path loss in dB, `20 log10(4π d f / c)`.
pub fn free_space_path_loss_db(
    distance_m: f64,
    carrier_hz: f64,
    consts: &PhysicalConstants,
) -> Result<f64, LinkError> {
    check_distance(distance_m)?;
    Ok(20.0 * (4.0 * PI * distance_m * carrier_hz / consts.speed_of_light_m_s).log10())
}

/// Linear SNR of an AWGN RF link, `P_t G_a G_b / (k_B T B L)`.
pub fn rf_snr(
    params: &RfLinkParams,
    distance_m: f64,
    consts: &PhysicalConstants,
) -> Result<f64, LinkError> {
    let loss = free_space_path_loss(distance_m, params.carrier_hz, consts)?;
    let signal = dbm_to_watts(params.tx_power_dbm)
        * db_to_linear(params.tx_gain_dbi)
        * db_to_linear(params.rx_gain_dbi);
    let noise = consts.boltzmann_j_per_k * params.noise_temperature_k * params.bandwidth_hz;
    Ok(signal / (noise * loss))
}

/// Shannon capacity `B log2(1 + SNR)`. Negative SNR is treated as zero.
pub fn shannon_rate(snr_linear: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * snr_linear.max(0.0).ln_1p() / std::f64::consts::LN_2
}

/// One transfer's payload and endpoint processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionSpec {
    pub payload_samples: u64,
    pub bits_per_sample: f64,
    pub data_rate_bps: f64,
    pub proc_delay_sender_s: f64,
    pub proc_delay_receiver_s: f64,
}

impl TransmissionSpec {
    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.bits_per_sample > 0.0) {
            return Err(LinkError::InvalidParameter(format!(
                "bits_per_sample must be positive, got {}",
                self.bits_per_sample
            )));
        }
        if !(self.data_rate_bps > 0.0) {
            return Err(LinkError::ZeroRate);
        }
        if !(self.proc_delay_sender_s >= 0.0 && self.proc_delay_receiver_s >= 0.0) {
            return Err(LinkError::InvalidParameter(
                "processing delays must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Components of a link delay; [`DelayBreakdown::total`] is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBreakdown {
    pub transmission_s: f64,
    pub propagation_s: f64,
    pub processing_sender_s: f64,
    pub processing_receiver_s: f64,
}

impl DelayBreakdown {
    pub fn total(&self) -> f64 {
        self.transmission_s + self.propagation_s + self.processing_sender_s + self.processing_receiver_s
    }
}

/// Transmission + propagation + processing delay of one transfer.
/// Zero distance is allowed (co-located endpoints).
pub fn link_delay(
    spec: &TransmissionSpec,
    distance_m: f64,
    consts: &PhysicalConstants,
) -> Result<DelayBreakdown, LinkError> {
    spec.validate()?;
    if !(distance_m >= 0.0 && distance_m.is_finite()) {
        return Err(LinkError::NonPositiveDistance(distance_m));
    }
    Ok(DelayBreakdown {
        transmission_s: spec.bits_per_sample * spec.payload_samples as f64 / spec.data_rate_bps,
        propagation_s: distance_m / consts.speed_of_light_m_s,
        processing_sender_s: spec.proc_delay_sender_s,
        processing_receiver_s: spec.proc_delay_receiver_s,
    })
}

/// Optical link parameters (Lambertian LED transmitter, photodetector
/// receiver, Hufnagel-Valley turbulence).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FsoLinkParams {
    pub tx_power_dbm: f64,
    pub lambertian_order: f64,
    pub detector_area_m2: f64,
    pub viewing_angle_rad: f64,
    pub filter_transmission: f64,
    pub concentrator_gain: f64,
    pub incidence_angle_rad: f64,
    pub responsivity: f64,
    pub noise_variance: f64,
    pub aperture_radius_m: f64,
    pub divergence_angle_rad: f64,
    pub wind_speed_m_s: f64,
    pub hv_constant: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

/// Reference path used to calibrate the default FSO noise variance: a
/// 2000 km satellite-to-HAP hop with the HAP at 20 km.
pub const FSO_CALIBRATION_DISTANCE_M: f64 = 2.0e6;
pub const FSO_CALIBRATION_ALTITUDE_M: f64 = 20_000.0;
/// Nominal data rate, 16 Mb/s.
pub const NOMINAL_RATE_BPS: f64 = 16.0e6;

impl Default for FsoLinkParams {
    fn default() -> Self {
        let mut p = Self {
            tx_power_dbm: 10.0,
            lambertian_order: 1.0,
            detector_area_m2: 1.0e-4,
            viewing_angle_rad: 0.0,
            filter_transmission: 1.0,
            concentrator_gain: 1.0,
            incidence_angle_rad: 0.0,
            responsivity: 0.5,
            noise_variance: 1.0,
            aperture_radius_m: 0.05,
            divergence_angle_rad: 1.0e-3,
            wind_speed_m_s: 21.0,
            hv_constant: 1.7e-14,
            carrier_hz: 2.4e9,
            bandwidth_hz: 1.0e6,
        };
        p.noise_variance = p.calibrated_noise_variance(
            &RfLinkParams::default(),
            FSO_CALIBRATION_DISTANCE_M,
            FSO_CALIBRATION_ALTITUDE_M,
            NOMINAL_RATE_BPS,
            &PhysicalConstants::default(),
        );
        p
    }
}

impl FsoLinkParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(LinkError::InvalidParameter(format!("fso.{msg}")))
            }
        };
        check(self.lambertian_order >= 0.0, "lambertian_order must be >= 0")?;
        check(self.detector_area_m2 > 0.0, "detector_area_m2 must be > 0")?;
        check(
            self.filter_transmission > 0.0 && self.filter_transmission <= 1.0,
            "filter_transmission must be in (0, 1]",
        )?;
        check(self.responsivity > 0.0, "responsivity must be > 0")?;
        check(self.noise_variance > 0.0, "noise_variance must be > 0")?;
        check(self.divergence_angle_rad > 0.0, "divergence_angle_rad must be > 0")?;
        check(self.aperture_radius_m > 0.0, "aperture_radius_m must be > 0")?;
        check(self.carrier_hz > 0.0, "carrier_hz must be > 0")?;
        check(self.bandwidth_hz > 0.0, "bandwidth_hz must be > 0")?;
        check(self.hv_constant >= 0.0, "hv_constant must be >= 0")?;
        check(self.concentrator_gain >= 0.0, "concentrator_gain must be >= 0")?;
        Ok(())
    }

    /// Noise variance at which this optical link reaches the same SNR as
    /// `rf` over the reference path.
    pub fn calibrated_noise_variance(
        &self,
        rf: &RfLinkParams,
        distance_m: f64,
        altitude_m: f64,
        nominal_rate_bps: f64,
        consts: &PhysicalConstants,
    ) -> f64 {
        let target = rf_snr(rf, distance_m, consts).unwrap_or(1.0);
        let unit = Self {
            noise_variance: 1.0,
            ..*self
        };
        let snr_at_unit_noise = unit
            .path_snr(distance_m, altitude_m, nominal_rate_bps, consts)
            .unwrap_or(0.0);
        if snr_at_unit_noise > 0.0 && target > 0.0 {
            snr_at_unit_noise / target
        } else {
            1.0
        }
    }

    /// Received power fraction after geometric spreading and turbulence.
    /// The geometric term is capped at 1 (aperture larger than the beam
    /// footprint); turbulence divides when it exceeds 1.
    pub fn attenuation(
        &self,
        distance_m: f64,
        altitude_m: f64,
        consts: &PhysicalConstants,
    ) -> Result<f64, LinkError> {
        let lg = fso_geometric_loss(self, distance_m)?;
        let lt = fso_turbulence_loss(self, distance_m, altitude_m, consts)?;
        Ok(lg.min(1.0) / lt.max(1.0))
    }

    /// SNR of the optical path with spreading and turbulence applied to the
    /// transmit power, evaluated at `rate_bps`.
    pub fn path_snr(
        &self,
        distance_m: f64,
        altitude_m: f64,
        rate_bps: f64,
        consts: &PhysicalConstants,
    ) -> Result<f64, LinkError> {
        let gain = fso_channel_gain(self, distance_m)?.value();
        let atten = self.attenuation(distance_m, altitude_m, consts)?;
        Ok(fso_snr(self, gain * atten, rate_bps))
    }
}

/// Optical channel gain, or a marker that the transmitter lies outside the
/// receiver's field of view (`|θ| ≥ π/2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FsoGain {
    Received(f64),
    OutOfView,
}

impl FsoGain {
    pub fn value(self) -> f64 {
        match self {
            FsoGain::Received(g) => g,
            FsoGain::OutOfView => 0.0,
        }
    }
}

/// Lambertian channel gain
/// `(σ+1)/(2π d²) · A₀ · cos^σ(α_e) · T_f · g(θ) · cos θ`.
pub fn fso_channel_gain(params: &FsoLinkParams, distance_m: f64) -> Result<FsoGain, LinkError> {
    check_distance(distance_m)?;
    if params.incidence_angle_rad.abs() >= PI / 2.0 {
        return Ok(FsoGain::OutOfView);
    }
    let sigma = params.lambertian_order;
    let g = (sigma + 1.0) / (2.0 * PI * distance_m * distance_m)
        * params.detector_area_m2
        * params.viewing_angle_rad.cos().powf(sigma)
        * params.filter_transmission
        * params.concentrator_gain
        * params.incidence_angle_rad.cos();
    Ok(FsoGain::Received(g.max(0.0)))
}

/// Optical SNR `(ρ G P_t)² B / (N R)` with `P_t` in watts.
pub fn fso_snr(params: &FsoLinkParams, gain: f64, data_rate_bps: f64) -> f64 {
    let i = params.responsivity * gain * dbm_to_watts(params.tx_power_dbm);
    i * i * params.bandwidth_hz / (params.noise_variance * data_rate_bps)
}

/// Geometric spreading term `4πr² / (π (ξ d)²)`.
pub fn fso_geometric_loss(params: &FsoLinkParams, distance_m: f64) -> Result<f64, LinkError> {
    check_distance(distance_m)?;
    if !(params.divergence_angle_rad > 0.0) {
        return Err(LinkError::InvalidParameter("divergence_angle_rad must be > 0".into()));
    }
    let spot = params.divergence_angle_rad * distance_m;
    Ok(4.0 * PI * params.aperture_radius_m.powi(2) / (PI * spot * spot))
}

/// Hufnagel-Valley refractive-index structure parameter at altitude `z`:
/// `0.00594 (V/27)² (1e-5 z)^10 e^{-z/1000} + 2.7e-16 e^{-z/1500} + K e^{-z/100}`.
pub fn hv_refractive_index(params: &FsoLinkParams, altitude_m: f64) -> f64 {
    let z = altitude_m.max(0.0);
    let wind = params.wind_speed_m_s / 27.0;
    0.00594 * wind * wind * (1e-5 * z).powi(10) * (-z / 1000.0).exp()
        + 2.7e-16 * (-z / 1500.0).exp()
        + params.hv_constant * (-z / 100.0).exp()
}

/// Turbulence loss `√(23.17 (2πf/c · 10⁹)^{7/6} M²(z) d^{11/6})`.
pub fn fso_turbulence_loss(
    params: &FsoLinkParams,
    distance_m: f64,
    altitude_m: f64,
    consts: &PhysicalConstants,
) -> Result<f64, LinkError> {
    check_distance(distance_m)?;
    let m2 = hv_refractive_index(params, altitude_m);
    Ok(turbulence_from_m2(params.carrier_hz, m2, distance_m, consts))
}

pub(crate) fn turbulence_from_m2(
    carrier_hz: f64,
    m2: f64,
    distance_m: f64,
    consts: &PhysicalConstants,
) -> f64 {
    let k = 2.0 * PI * carrier_hz / consts.speed_of_light_m_s * 1e9;
    (23.17 * k.powf(7.0 / 6.0) * m2 * distance_m.powf(11.0 / 6.0)).sqrt()
}

/// Which physical layer carries a link class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMedium {
    Rf,
    Fso,
}

impl LinkMedium {
    /// RF links are full-duplex; optical links are half-duplex.
    pub fn half_duplex(self) -> bool {
        matches!(self, LinkMedium::Fso)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// Intra-orbit inter-satellite link.
    Isl,
    /// Satellite to HAP.
    Shl,
    /// HAP to HAP (or server to server).
    Ihl,
    /// Satellite to ground station.
    Sgl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// Every link runs at the configured fixed rate.
    #[default]
    Fixed,
    /// Rate from Shannon capacity of the link's SNR at send time.
    Shannon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkMedia {
    pub isl: LinkMedium,
    pub shl: LinkMedium,
    pub ihl: LinkMedium,
    pub sgl: LinkMedium,
}

impl Default for LinkMedia {
    fn default() -> Self {
        Self {
            isl: LinkMedium::Fso,
            shl: LinkMedium::Fso,
            ihl: LinkMedium::Fso,
            sgl: LinkMedium::Rf,
        }
    }
}

impl LinkMedia {
    pub fn medium(&self, class: LinkClass) -> LinkMedium {
        match class {
            LinkClass::Isl => self.isl,
            LinkClass::Shl => self.shl,
            LinkClass::Ihl => self.ihl,
            LinkClass::Sgl => self.sgl,
        }
    }
}

/// Per-node-class processing delays (t_a when sending, t_b when receiving).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessingDelays {
    pub satellite_s: f64,
    pub hap_s: f64,
    pub ground_station_s: f64,
}

/// Everything needed to time a model transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub rate_mode: RateMode,
    pub fixed_rate_bps: f64,
    pub bits_per_param: u32,
    pub metadata_bits: u64,
    pub media: LinkMedia,
    pub processing: ProcessingDelays,
    pub rf: RfLinkParams,
    pub fso: FsoLinkParams,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            rate_mode: RateMode::Fixed,
            fixed_rate_bps: NOMINAL_RATE_BPS,
            bits_per_param: 32,
            metadata_bits: 1024,
            media: LinkMedia::default(),
            processing: ProcessingDelays::default(),
            rf: RfLinkParams::default(),
            fso: FsoLinkParams::default(),
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.fixed_rate_bps > 0.0 && self.fixed_rate_bps.is_finite()) {
            return Err(LinkError::InvalidParameter(format!(
                "fixed_rate_bps must be positive, got {}",
                self.fixed_rate_bps
            )));
        }
        if self.bits_per_param == 0 {
            return Err(LinkError::InvalidParameter("bits_per_param must be > 0".into()));
        }
        let p = &self.processing;
        if ![p.satellite_s, p.hap_s, p.ground_station_s]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
        {
            return Err(LinkError::InvalidParameter(
                "processing delays must be finite and non-negative".into(),
            ));
        }
        self.rf.validate()?;
        self.fso.validate()
    }

    /// Bits on the wire for `models` model vectors of `param_count`
    /// parameters plus one metadata block.
    pub fn payload_bits(&self, models: u64, param_count: usize) -> u64 {
        models * param_count as u64 * u64::from(self.bits_per_param) + self.metadata_bits
    }

    /// Data rate for a link of `medium` over `distance_m`, whose lower
    /// endpoint sits at `altitude_m`.
    pub fn data_rate(
        &self,
        medium: LinkMedium,
        distance_m: f64,
        altitude_m: f64,
        consts: &PhysicalConstants,
    ) -> Result<f64, LinkError> {
        match self.rate_mode {
            RateMode::Fixed => Ok(self.fixed_rate_bps),
            RateMode::Shannon => {
                let d = distance_m.max(1.0);
                let (snr, bw) = match medium {
                    LinkMedium::Rf => (rf_snr(&self.rf, d, consts)?, self.rf.bandwidth_hz),
                    LinkMedium::Fso => (
                        self.fso.path_snr(d, altitude_m, self.fixed_rate_bps, consts)?,
                        self.fso.bandwidth_hz,
                    ),
                };
                let rate = shannon_rate(snr, bw);
                if rate > 0.0 {
                    Ok(rate)
                } else {
                    Err(LinkError::ZeroRate)
                }
            }
        }
    }

    /// Delay breakdown for `payload_bits` over one link.
    pub fn transfer_delay(
        &self,
        medium: LinkMedium,
        payload_bits: u64,
        distance_m: f64,
        altitude_m: f64,
        proc_sender_s: f64,
        proc_receiver_s: f64,
        consts: &PhysicalConstants,
    ) -> Result<DelayBreakdown, LinkError> {
        let rate = self.data_rate(medium, distance_m, altitude_m, consts)?;
        let spec = TransmissionSpec {
            payload_samples: payload_bits,
            bits_per_sample: 1.0,
            data_rate_bps: rate,
            proc_delay_sender_s: proc_sender_s,
            proc_delay_receiver_s: proc_receiver_s,
        };
        link_delay(&spec, distance_m, consts)
    }
}

/// One line of a link-budget table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetLine {
    pub quantity: String,
    pub value: f64,
    pub unit: String,
}

/// dB-domain breakdown of both link types over one path.
pub fn link_budget_table(
    config: &LinkConfig,
    distance_m: f64,
    altitude_m: f64,
    payload_bits: u64,
    consts: &PhysicalConstants,
) -> Result<Vec<BudgetLine>, LinkError> {
    let line = |q: &str, v: f64, u: &str| BudgetLine {
        quantity: q.into(),
        value: v,
        unit: u.into(),
    };
    let rf = &config.rf;
    let fso = &config.fso;
    let rf_snr_lin = rf_snr(rf, distance_m, consts)?;
    let gain = fso_channel_gain(fso, distance_m)?;
    let lg = fso_geometric_loss(fso, distance_m)?;
    let m2 = hv_refractive_index(fso, altitude_m);
    let lt = fso_turbulence_loss(fso, distance_m, altitude_m, consts)?;
    let fso_snr_lin = fso.path_snr(distance_m, altitude_m, config.fixed_rate_bps, consts)?;
    let mut rows = vec![
        line("distance", distance_m / 1000.0, "km"),
        line("lower endpoint altitude", altitude_m / 1000.0, "km"),
        line("propagation delay", distance_m / consts.speed_of_light_m_s * 1e3, "ms"),
        line("rf tx power", rf.tx_power_dbm, "dBm"),
        line("rf tx gain", rf.tx_gain_dbi, "dBi"),
        line("rf rx gain", rf.rx_gain_dbi, "dBi"),
        line(
            "rf free-space path loss",
            free_space_path_loss_db(distance_m, rf.carrier_hz, consts)?,
            "dB",
        ),
        line(
            "rf noise power",
            linear_to_db(consts.boltzmann_j_per_k * rf.noise_temperature_k * rf.bandwidth_hz)
                + 30.0,
            "dBm",
        ),
        line("rf snr", linear_to_db(rf_snr_lin), "dB"),
        line("rf shannon rate", shannon_rate(rf_snr_lin, rf.bandwidth_hz) / 1e6, "Mb/s"),
        line("fso tx power", fso.tx_power_dbm, "dBm"),
        line("fso channel gain", linear_to_db(gain.value()), "dB"),
        line("fso geometric loss", linear_to_db(lg), "dB"),
        line("fso refractive index M^2", m2, "m^-2/3"),
        line("fso turbulence loss", linear_to_db(lt), "dB"),
        line("fso snr", linear_to_db(fso_snr_lin), "dB"),
        line(
            "fso shannon rate",
            shannon_rate(fso_snr_lin, fso.bandwidth_hz) / 1e6,
            "Mb/s",
        ),
        line("fixed rate", config.fixed_rate_bps / 1e6, "Mb/s"),
        line("payload", payload_bits as f64 / 1e6, "Mbit"),
    ];
    for (name, medium) in [("rf", LinkMedium::Rf), ("fso", LinkMedium::Fso)] {
        let delay = config
            .transfer_delay(medium, payload_bits, distance_m, altitude_m, 0.0, 0.0, consts)
            .map(|d| d.total())
            .unwrap_or(f64::INFINITY);
        rows.push(line(&format!("{name} transfer delay"), delay, "s"));
    }
    Ok(rows)
}
