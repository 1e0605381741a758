//! Closed-form radio, mobility, energy and latency models.
//!
//! Conventions: power in the link budget is handled in dBm (transmit power
//! minus path loss), the interference-plus-noise floor is converted to dBm and
//! subtracted, and the resulting SINR in dB feeds Shannon's formula. The
//! free-space reference loss uses d0 = 1 m and c = 3e8 m/s.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::scenario::{FlightConstants, LayerProfile, Position3, RadioConstants, Scenario, SPEED_OF_LIGHT};

/// Close-in reference distance, meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
pub const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("distance {0} m is below the 1 m reference distance")]
    BelowReferenceDistance(f64),
    #[error("cannot send {bits} bits over a zero-rate link")]
    UnreachableLink { bits: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance: f64,
    pub pathloss_db: f64,
    pub sinr_db: f64,
    /// bits/s
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub compute: f64,
    pub transmit: f64,
    pub flight: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.compute + self.transmit + self.flight
    }

    pub fn add(&mut self, other: &EnergyBreakdown) {
        self.compute += other.compute;
        self.transmit += other.transmit;
        self.flight += other.flight;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyBreakdown {
    pub waiting: f64,
    pub transmit: f64,
    pub compute: f64,
}

impl LatencyBreakdown {
    /// Age of information: waiting + transmission + computation.
    pub fn total(&self) -> f64 {
        self.waiting + self.transmit + self.compute
    }

    pub fn add(&mut self, other: &LatencyBreakdown) {
        self.waiting += other.waiting;
        self.transmit += other.transmit;
        self.compute += other.compute;
    }
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Thermal noise power k·T·B in watts.
pub fn thermal_noise_power(bandwidth: f64, temperature_k: f64) -> f64 {
    BOLTZMANN * temperature_k * bandwidth
}

/// Free-space loss at the reference distance for carrier `frequency`.
pub fn free_space_reference_db(frequency: f64) -> f64 {
    20.0 * (4.0 * PI * frequency * REFERENCE_DISTANCE_M / SPEED_OF_LIGHT).log10()
}

/// Close-in path loss with a caller-sampled shadowing term.
pub fn pathloss_ci(distance: f64, frequency: f64, n_ci: f64, shadow_db: f64) -> Result<f64, PhysicsError> {
    if !(distance >= REFERENCE_DISTANCE_M) {
        return Err(PhysicsError::BelowReferenceDistance(distance));
    }
    Ok(free_space_reference_db(frequency) + 10.0 * n_ci * distance.log10() + shadow_db)
}

/// SINR in dB from transmit power (dBm), path loss (dB), and interference
/// and noise powers (W).
pub fn sinr(tx_power_dbm: f64, pathloss_db: f64, interference_w: f64, noise_w: f64) -> f64 {
    let received_dbm = tx_power_dbm - pathloss_db;
    received_dbm - watts_to_dbm(interference_w + noise_w)
}

/// Shannon rate in bits/s.
pub fn link_rate(bandwidth: f64, sinr_db: f64) -> f64 {
    let linear = 10f64.powf(sinr_db / 10.0);
    bandwidth * (1.0 + linear).log2()
}

/// Full link budget between two positions.
pub fn link_budget(
    a: &Position3,
    b: &Position3,
    radio: &RadioConstants,
    tx_power_w: f64,
    bandwidth: f64,
    shadow_db: f64,
) -> LinkBudget {
    let distance = a.distance(b);
    let pathloss_db = pathloss_ci(
        distance.max(REFERENCE_DISTANCE_M),
        radio.frequency,
        radio.pathloss_exponent,
        shadow_db,
    )
    .expect("distance clamped to the reference distance");
    let sinr_db = sinr(
        watts_to_dbm(tx_power_w),
        pathloss_db,
        radio.interference_power,
        radio.noise_power,
    );
    LinkBudget {
        distance,
        pathloss_db,
        sinr_db,
        rate: link_rate(bandwidth, sinr_db),
    }
}

/// Rotary-wing propulsion power at forward speed `speed`:
/// blade profile + induced + parasite terms.
pub fn propulsion_power(speed: f64, c: &FlightConstants) -> f64 {
    let v2 = speed * speed;
    let v4 = v2 * v2;
    let v0_2 = c.hover_induced_speed * c.hover_induced_speed;
    let v0_4 = v0_2 * v0_2;
    let blade = c.p_blade * (1.0 + 3.0 * v2 / (c.tip_speed * c.tip_speed));
    let induced = c.p_induced * ((1.0 + v4 / (4.0 * v0_4)).sqrt() - v2 / (2.0 * v0_2));
    let parasite = parasite_power(speed, c);
    blade + induced + parasite
}

/// The fuselage-drag term ½·ζ·ρ·ς·s·ν³ on its own.
pub fn parasite_power(speed: f64, c: &FlightConstants) -> f64 {
    0.5 * c.drag_ratio * c.air_density * c.rotor_solidity * c.disk_area * speed.powi(3)
}

/// Energy to fly `distance` meters at cruise speed.
pub fn flight_energy(distance: f64, c: &FlightConstants) -> f64 {
    propulsion_power(c.speed, c) * distance / c.speed
}

/// Energy reserve needed to fly back to `base` from `from`.
pub fn rendezvous_energy(from: &Position3, base: &Position3, c: &FlightConstants) -> f64 {
    flight_energy(from.distance(base), c)
}

/// Σ k0·f²·c over the slice.
pub fn compute_energy(layers: &[LayerProfile], compute_rate: f64, k0: f64) -> f64 {
    let cycles: f64 = layers.iter().map(|l| l.compute_cycles).sum();
    k0 * compute_rate * compute_rate * cycles
}

/// Σ c / f over the slice.
pub fn compute_time(layers: &[LayerProfile], compute_rate: f64) -> f64 {
    let cycles: f64 = layers.iter().map(|l| l.compute_cycles).sum();
    cycles / compute_rate
}

/// Time and sender energy to push `bits` over a link of `rate` bits/s.
pub fn transmit_time_energy(bits: f64, rate: f64, tx_power: f64) -> Result<(f64, f64), PhysicsError> {
    if bits == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(rate > 0.0) {
        return Err(PhysicsError::UnreachableLink { bits });
    }
    let t = bits / rate;
    Ok((t, tx_power * t))
}

/// Pairwise link rates inside the formation, indexed by fleet position.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n: usize,
    rates: Vec<f64>,
}

impl LinkTable {
    /// Links with the given shadowing sample per ordered pair.
    pub fn with_shadowing(scenario: &Scenario, mut shadow_db: impl FnMut(usize, usize) -> f64) -> LinkTable {
        let n = scenario.fleet.len();
        let mut rates = vec![f64::INFINITY; n * n];
        for (i, a) in scenario.fleet.iter().enumerate() {
            for (j, b) in scenario.fleet.iter().enumerate() {
                if i == j {
                    continue;
                }
                let budget = link_budget(&a.position, &b.position, &scenario.radio, a.tx_power, a.bandwidth, shadow_db(i, j));
                rates[i * n + j] = budget.rate;
            }
        }
        LinkTable { n, rates }
    }

    /// Links without shadowing.
    pub fn deterministic(scenario: &Scenario) -> LinkTable {
        Self::with_shadowing(scenario, |_, _| 0.0)
    }

    /// Links with shadowing drawn from N(0, σ²) where σ is the scenario's
    /// `shadow_sigma`. With σ = 0 this equals [`LinkTable::deterministic`].
    pub fn sampled<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> LinkTable {
        let sigma = scenario.radio.shadow_sigma;
        if sigma == 0.0 {
            return Self::deterministic(scenario);
        }
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        Self::with_shadowing(scenario, |_, _| normal.sample(rng))
    }

    /// Rate from fleet index `from` to `to`; infinite on the diagonal.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.n + to]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pathloss_at_reference_distance() {
        let pl = pathloss_ci(1.0, 2.4e9, 2.0, 0.0).unwrap();
        assert_eq!(pl, free_space_reference_db(2.4e9));
    }

    #[test]
    fn pathloss_below_reference_is_error() {
        assert_eq!(
            pathloss_ci(0.5, 2.4e9, 2.0, 0.0),
            Err(PhysicsError::BelowReferenceDistance(0.5))
        );
    }

    #[test]
    fn pathloss_2_4ghz_1km() {
        // 20·log10(4π·2.4e9/3e8) = 40.0460..., plus 10·2·log10(1000) = 60
        let pl = pathloss_ci(1000.0, 2.4e9, 2.0, 0.0).unwrap();
        assert_relative_eq!(pl, 100.045_997_020_28, max_relative = 1e-9);
    }

    #[test]
    fn doubling_distance_adds_6_02_db() {
        let a = pathloss_ci(500.0, 2.4e9, 2.0, 0.0).unwrap();
        let b = pathloss_ci(1000.0, 2.4e9, 2.0, 0.0).unwrap();
        assert_relative_eq!(b - a, 20.0 * 2f64.log10(), max_relative = 1e-12);
    }

    #[test]
    fn sinr_equality_case() {
        let noise = 1e-12;
        let received = watts_to_dbm(noise);
        assert_relative_eq!(sinr(received + 50.0, 50.0, 0.0, noise), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sinr_table_values() {
        let s = sinr(20.0, 100.045_997_020_28, 0.0, dbm_to_watts(-115.0));
        assert_relative_eq!(s, 34.954_002_979_72, max_relative = 1e-9);
    }

    #[test]
    fn interference_equal_to_noise_costs_3_01_db() {
        let n = dbm_to_watts(-115.0);
        let a = sinr(20.0, 100.0, 0.0, n);
        let b = sinr(20.0, 100.0, n, n);
        assert_relative_eq!(a - b, 10.0 * 2f64.log10(), max_relative = 1e-12);
    }

    #[test]
    fn rate_values() {
        assert_eq!(link_rate(1e6, f64::NEG_INFINITY), 0.0);
        assert_relative_eq!(link_rate(1e6, 15.0), 5.027_807_67e6, max_relative = 1e-7);
        assert_relative_eq!(link_rate(2e6, 15.0), 2.0 * link_rate(1e6, 15.0), max_relative = 1e-15);
        assert_eq!(link_rate(0.0, 15.0), 0.0);
    }

    #[test]
    fn hover_power_is_blade_plus_induced() {
        let c = FlightConstants::default();
        assert_eq!(propulsion_power(0.0, &c), c.p_blade + c.p_induced);
    }

    #[test]
    fn parasite_term_at_20_mps() {
        let c = FlightConstants::default();
        assert_relative_eq!(parasite_power(20.0, &c), 73.941, max_relative = 1e-4);
    }

    #[test]
    fn cruise_power_at_20_mps() {
        let c = FlightConstants::default();
        // 86.6667 blade + 3.5671 induced + 73.941 parasite
        assert_relative_eq!(propulsion_power(20.0, &c), 164.174_793_767_8, max_relative = 1e-9);
        assert_relative_eq!(flight_energy(1000.0, &c), 164.174_793_767_8 * 50.0, max_relative = 1e-9);
    }

    #[test]
    fn compute_energy_values() {
        let layer = |c: f64| LayerProfile {
            layer_index: 1,
            compute_cycles: c,
            memory_bytes: 1.0,
            output_bits: 0.0,
        };
        assert_eq!(compute_energy(&[], 15e9, 1e-28), 0.0);
        assert_relative_eq!(compute_energy(&[layer(1e9)], 15e9, 1e-28), 22.5, max_relative = 1e-12);
        assert_relative_eq!(
            compute_energy(&[layer(1e9), layer(1e9)], 15e9, 1e-28),
            45.0,
            max_relative = 1e-12
        );
        assert_eq!(compute_time(&[], 15e9), 0.0);
        assert_relative_eq!(compute_time(&[layer(3e9)], 15e9), 0.2, max_relative = 1e-12);
        assert_relative_eq!(
            compute_time(&[layer(1e9), layer(2e9)], 15e9),
            compute_time(&[layer(1e9)], 15e9) + compute_time(&[layer(2e9)], 15e9),
            max_relative = 1e-12
        );
    }

    #[test]
    fn transmit_values() {
        assert_eq!(transmit_time_energy(0.0, 0.0, 0.1), Ok((0.0, 0.0)));
        let (t, e) = transmit_time_energy(8e6, 4e6, 0.1).unwrap();
        assert_relative_eq!(t, 2.0);
        assert_relative_eq!(e, 0.2, max_relative = 1e-12);
        assert!(transmit_time_energy(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn ktb_noise_floor() {
        let p = thermal_noise_power(1e6, 290.0);
        assert_relative_eq!(watts_to_dbm(p), -113.9753, max_relative = 1e-5);
    }

    proptest::proptest! {
        #[test]
        fn dbm_round_trip(w in 1e-15f64..1e3) {
            let back = dbm_to_watts(watts_to_dbm(w));
            proptest::prop_assert!((back - w).abs() <= 1e-12 * w);
        }

        #[test]
        fn pathloss_monotone_in_distance(d in 1.0f64..1e5, extra in 0.0f64..1e4) {
            let a = pathloss_ci(d, 2.4e9, 2.0, 0.0).unwrap();
            let b = pathloss_ci(d + extra, 2.4e9, 2.0, 0.0).unwrap();
            proptest::prop_assert!(b >= a);
        }
    }
}
