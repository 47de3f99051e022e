//! Seeded generator of desk-scale flight operations with known structure.
//!
//! Aircraft fly hub-and-spoke rotations: leg one leaves the carrier hub in the
//! morning, subsequent legs alternate outstation and hub until the evening.
//! Every leg after the first is turnaround-matched to its predecessor, so
//! `synthesize_fixture(n, ..)` emits exactly `n` labelable legs plus one
//! opening leg per rotation.
//!
//! Departure delay is additive: base + hour slope + departure-airport
//! congestion + carrier offset + gaussian noise. Arrival delay is departure
//! delay plus en-route noise. Ground times are gamma distributed with an
//! aircraft-type multiplier.

use chrono::{Duration, NaiveDate, Timelike};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::labels::MAX_TURNAROUND_MINUTES;
use super::record::{FlightRecord, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierProfile {
    pub code: String,
    pub hub: String,
    pub fleet: Vec<String>,
    pub weight: f64,
    pub delay_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirportProfile {
    pub code: String,
    /// Relative frequency as an outstation destination.
    pub weight: f64,
    /// Added to the departure delay of legs leaving this airport.
    pub congestion_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftProfile {
    pub code: String,
    pub turnaround_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureProfile {
    pub year: i32,
    pub months: Vec<u32>,
    pub carriers: Vec<CarrierProfile>,
    pub airports: Vec<AirportProfile>,
    pub aircraft: Vec<AircraftProfile>,
    pub mean_dep_delay: f64,
    pub dep_noise_sd: f64,
    /// Minutes of departure delay per scheduled hour past `hour_pivot`.
    pub hour_effect: f64,
    pub hour_pivot: f64,
    pub mean_arr_delay: f64,
    pub enroute_noise_sd: f64,
    pub mean_turnaround: f64,
    pub turnaround_shape: f64,
    pub mean_sched_duration: f64,
    pub sched_duration_shape: f64,
    pub max_legs: usize,
    pub last_departure_hour: u32,
}

fn carrier(code: &str, hub: &str, fleet: &[&str], weight: f64, delay_offset: f64) -> CarrierProfile {
    CarrierProfile {
        code: code.into(),
        hub: hub.into(),
        fleet: fleet.iter().map(|s| s.to_string()).collect(),
        weight,
        delay_offset,
    }
}

fn airport(code: &str, weight: f64, congestion_offset: f64) -> AirportProfile {
    AirportProfile {
        code: code.into(),
        weight,
        congestion_offset,
    }
}

impl Default for FixtureProfile {
    fn default() -> Self {
        let aircraft = [("A320", 1.0), ("A321", 1.1), ("B738", 0.9), ("E190", 0.8), ("CRJ9", 0.75), ("A333", 1.5)]
            .iter()
            .map(|&(c, f)| AircraftProfile {
                code: c.into(),
                turnaround_factor: f,
            })
            .collect();
        Self {
            year: 2019,
            months: vec![3, 6, 9, 12],
            carriers: vec![
                carrier("LH", "FRA", &["A320", "A321", "CRJ9"], 3.0, 1.0),
                carrier("AF", "CDG", &["A320", "A321", "E190"], 2.5, 4.0),
                carrier("KL", "AMS", &["B738", "E190"], 2.0, -2.0),
                carrier("BA", "LHR", &["A320", "A321", "A333"], 2.0, 3.0),
                carrier("IB", "MAD", &["A320", "A333"], 1.5, -3.0),
                carrier("SK", "CPH", &["A320", "CRJ9"], 1.0, -6.0),
            ],
            airports: vec![
                airport("FRA", 1.0, 2.0),
                airport("CDG", 1.0, 3.0),
                airport("AMS", 1.0, 0.0),
                airport("LHR", 1.0, 4.0),
                airport("MAD", 1.0, -1.0),
                airport("CPH", 1.0, -2.0),
                airport("VIE", 1.5, -3.0),
                airport("MUC", 1.5, -1.0),
                airport("FCO", 1.2, 3.0),
                airport("BCN", 1.2, 2.0),
                airport("ZRH", 1.0, -2.0),
                airport("OSL", 0.8, -6.0),
                airport("DUB", 0.8, -4.0),
                airport("LIS", 0.7, 1.0),
                airport("PRG", 0.7, -5.0),
                airport("ATH", 0.6, 0.0),
            ],
            aircraft,
            mean_dep_delay: 11.1,
            dep_noise_sd: 20.0,
            hour_effect: 2.0,
            hour_pivot: 14.0,
            mean_arr_delay: 7.5,
            enroute_noise_sd: 16.0,
            mean_turnaround: 70.8,
            turnaround_shape: 4.0,
            mean_sched_duration: 110.0,
            sched_duration_shape: 6.0,
            max_legs: 6,
            last_departure_hour: 21,
        }
    }
}

impl FixtureProfile {
    /// No noise and no delay effects: every leg departs and arrives on time.
    pub fn quiet() -> Self {
        let mut p = Self::default();
        p.mean_dep_delay = 0.0;
        p.mean_arr_delay = 0.0;
        p.dep_noise_sd = 0.0;
        p.enroute_noise_sd = 0.0;
        p.hour_effect = 0.0;
        for c in &mut p.carriers {
            c.delay_offset = 0.0;
        }
        for a in &mut p.airports {
            a.congestion_offset = 0.0;
        }
        p
    }

    fn congestion(&self, code: &str) -> f64 {
        self.airports
            .iter()
            .find(|a| a.code == code)
            .map_or(0.0, |a| a.congestion_offset)
    }

    fn turnaround_factor(&self, code: &str) -> f64 {
        self.aircraft
            .iter()
            .find(|a| a.code == code)
            .map_or(1.0, |a| a.turnaround_factor)
    }

    /// Fleet-weighted mean turnaround factor, used to keep the overall mean
    /// ground time at `mean_turnaround`.
    fn mean_turnaround_factor(&self) -> f64 {
        let total: f64 = self.carriers.iter().map(|c| c.weight).sum();
        self.carriers
            .iter()
            .map(|c| {
                let f: f64 = c.fleet.iter().map(|t| self.turnaround_factor(t)).sum::<f64>() / c.fleet.len() as f64;
                c.weight * f
            })
            .sum::<f64>()
            / total
    }
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    let first_next = NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid month");
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    (first_next - first).num_days() as u32
}

fn round_to_grid(t: Timestamp, minutes: i64) -> Timestamp {
    let m = (t.hour() * 60 + t.minute()) as i64;
    let snapped = ((m as f64 / minutes as f64).round() as i64) * minutes;
    t + Duration::minutes(snapped - m)
}

struct Sampler<'a> {
    profile: &'a FixtureProfile,
    rng: ChaCha8Rng,
    turnaround_scale: f64,
}

impl Sampler<'_> {
    fn normal(&mut self, sd: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        sd * z
    }

    fn gamma(&mut self, shape: f64, mean: f64) -> f64 {
        Gamma::new(shape, mean / shape)
            .expect("positive gamma parameters")
            .sample(&mut self.rng)
    }

    fn dep_delay(&self, carrier: &CarrierProfile, dep: &str, hour: u32, noise: f64) -> i64 {
        let p = self.profile;
        let d = p.mean_dep_delay
            + p.hour_effect * (hour as f64 - p.hour_pivot)
            + p.congestion(dep)
            + carrier.delay_offset
            + noise;
        d.round() as i64
    }

    fn sched_duration(&mut self) -> i64 {
        let p = self.profile;
        (self.gamma(p.sched_duration_shape, p.mean_sched_duration).round() as i64).max(35)
    }

    fn arrival(&mut self, sobt: Timestamp, aobt: Timestamp, dep_delay: i64) -> (Timestamp, Timestamp) {
        let p = self.profile;
        let dur = self.sched_duration();
        let sibt = sobt + Duration::minutes(dur);
        let enroute = (p.mean_arr_delay - p.mean_dep_delay + self.normal(p.enroute_noise_sd)).round() as i64;
        let mut aibt = sibt + Duration::minutes(dep_delay + enroute);
        if aibt < aobt + Duration::minutes(10) {
            aibt = aobt + Duration::minutes(10);
        }
        (sibt, aibt)
    }
}

/// Generates flight legs for `n` turnaround-matched departures.
pub fn synthesize_fixture(n: usize, seed: u64, profile: &FixtureProfile) -> Vec<FlightRecord> {
    if n == 0 || profile.carriers.is_empty() {
        return Vec::new();
    }
    let mut s = Sampler {
        profile,
        rng: ChaCha8Rng::seed_from_u64(seed),
        turnaround_scale: profile.mean_turnaround / profile.mean_turnaround_factor(),
    };
    let carrier_pick = WeightedIndex::new(profile.carriers.iter().map(|c| c.weight)).expect("carrier weights");

    let mut records = Vec::with_capacity(n + n / 3);
    let mut labelable = 0usize;
    let mut rotation = 0usize;
    while labelable < n {
        let carrier = &profile.carriers[carrier_pick.sample(&mut s.rng)];
        let outstations: Vec<&AirportProfile> = profile.airports.iter().filter(|a| a.code != carrier.hub).collect();
        let out_pick = WeightedIndex::new(outstations.iter().map(|a| a.weight)).expect("airport weights");
        let aircraft_type = carrier.fleet[s.rng.random_range(0..carrier.fleet.len())].clone();
        let tail_id = format!("{}-{:06}", carrier.code, rotation);
        rotation += 1;

        let month = profile.months[s.rng.random_range(0..profile.months.len())];
        let day = s.rng.random_range(1..=days_in_month(profile.year, month));
        let date = NaiveDate::from_ymd_opt(profile.year, month, day).expect("valid date");
        let slot = s.rng.random_range(0..48) as i64;
        let mut sobt = date.and_hms_opt(5, 0, 0).expect("valid time") + Duration::minutes(slot * 5);

        let remaining = n - labelable;
        let legs = profile.max_legs.max(2).min(remaining + 1);
        let mut dep = carrier.hub.clone();
        let mut prev_arrival: Option<Timestamp> = None;
        let factor = profile.turnaround_factor(&aircraft_type);

        for leg in 0..legs {
            let arr = if dep == carrier.hub {
                outstations[out_pick.sample(&mut s.rng)].code.clone()
            } else {
                carrier.hub.clone()
            };
            let noise = s.normal(profile.dep_noise_sd);

            let (sobt_leg, dd) = match prev_arrival {
                None => (sobt, s.dep_delay(carrier, &dep, sobt.hour(), noise)),
                Some(aibt_prev) => {
                    let mut placed = None;
                    for _ in 0..20 {
                        let ground = s.gamma(profile.turnaround_shape, s.turnaround_scale * factor);
                        let target = aibt_prev + Duration::minutes(ground.round() as i64);
                        let mut dd = s.dep_delay(carrier, &dep, profile.hour_pivot as u32, noise);
                        for _ in 0..3 {
                            let h = (target - Duration::minutes(dd)).hour();
                            dd = s.dep_delay(carrier, &dep, h, noise);
                        }
                        let cand = round_to_grid(target - Duration::minutes(dd), 5);
                        let dd = s.dep_delay(carrier, &dep, cand.hour(), noise);
                        let realized = (cand + Duration::minutes(dd) - aibt_prev).num_minutes();
                        if (1..=MAX_TURNAROUND_MINUTES).contains(&realized) {
                            placed = Some((cand, dd));
                            break;
                        }
                    }
                    match placed {
                        Some(p) => p,
                        None => break,
                    }
                }
            };
            if leg >= 2 && sobt_leg.hour() > profile.last_departure_hour {
                break;
            }
            let aobt = sobt_leg + Duration::minutes(dd);
            let (sibt, aibt) = s.arrival(sobt_leg, aobt, dd);
            records.push(FlightRecord {
                carrier_code: carrier.code.clone(),
                dep_airport: dep.clone(),
                arr_airport: arr.clone(),
                aircraft_type: aircraft_type.clone(),
                tail_id: tail_id.clone(),
                sobt: sobt_leg,
                aobt,
                sibt,
                aibt,
            });
            if leg > 0 {
                labelable += 1;
            }
            sobt = sobt_leg;
            prev_arrival = Some(aibt);
            dep = arr;
        }
    }
    records
}
