//! Ground devices, UAVs and the HAPS ground point on a square area: mobility,
//! disk coverage, nearest-in-range association, flight energy and federated
//! round latency.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub side: f64,
    pub haps: Point,
}

impl Default for Area {
    fn default() -> Self {
        Area {
            side: 1000.0,
            haps: Point::new(500.0, 500.0),
        }
    }
}

impl Area {
    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.side).contains(&p.x) && (0.0..=self.side).contains(&p.y)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.side), p.y.clamp(0.0, self.side))
    }

    pub fn random_point(&self, rng: &mut impl Rng) -> Point {
        Point::new(rng.gen_range(0.0..=self.side), rng.gen_range(0.0..=self.side))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceState {
    pub position: Point,
    pub mobile: bool,
    /// Meters moved per decision period.
    pub speed: f64,
    pub waypoint: Point,
}

/// Energy spent by one UAV, by category.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyLedger {
    pub fly: f64,
    pub train: f64,
    pub upload: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.fly + self.train + self.upload
    }

    pub fn add(&mut self, other: &EnergyLedger) {
        self.fly += other.fly;
        self.train += other.train;
        self.upload += other.upload;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UavState {
    pub position: Point,
    /// Remaining energy in joules.
    pub energy: f64,
    pub spent: EnergyLedger,
}

impl UavState {
    pub fn new(position: Point, energy: f64) -> Self {
        UavState {
            position,
            energy,
            spent: EnergyLedger::default(),
        }
    }

    fn draw(&mut self, joules: f64) {
        self.energy = (self.energy - joules).max(0.0);
    }

    /// Charges `rounds` local training rounds if affordable.
    pub fn charge_training(&mut self, rounds: usize, params: &EnergyParams) -> bool {
        let cost = rounds as f64 * params.local_round_j;
        if cost > self.energy {
            return false;
        }
        self.draw(cost);
        self.spent.train += cost;
        true
    }

    pub fn charge_upload(&mut self, params: &EnergyParams) -> bool {
        if params.upload_j > self.energy {
            return false;
        }
        self.draw(params.upload_j);
        self.spent.upload += params.upload_j;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub upload_j: f64,
    pub local_round_j: f64,
    pub fly_j_per_km: f64,
    pub battery_capacity_j: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            upload_j: 30.0,
            local_round_j: 1.0,
            fly_j_per_km: 300.0,
            battery_capacity_j: 10_000.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.upload_j, self.local_round_j, self.fly_j_per_km, self.battery_capacity_j];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config("energy parameters must be positive and finite"));
        }
        Ok(())
    }

    /// Energy for one full participation: K rounds plus one upload.
    pub fn participation_j(&self, k_rounds: usize) -> f64 {
        training_energy(k_rounds, 1, self)
    }

    pub fn eligible(&self, uav: &UavState, k_rounds: usize) -> bool {
        uav.energy >= self.participation_j(k_rounds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyParams {
    pub local_round_s: f64,
    pub upload_base_s: f64,
    pub upload_per_m_s: f64,
    pub aggregation_s: f64,
    pub broadcast_s: f64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        LatencyParams {
            local_round_s: 0.1,
            upload_base_s: 1.0,
            upload_per_m_s: 0.004,
            aggregation_s: 0.5,
            broadcast_s: 0.5,
        }
    }
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.local_round_s,
            self.upload_base_s,
            self.upload_per_m_s,
            self.aggregation_s,
            self.broadcast_s,
        ];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::config("latency parameters must be non-negative and finite"));
        }
        Ok(())
    }
}

/// Advances mobile devices toward their waypoints; arrivals draw a new one.
pub fn step_mobility(devices: &mut [DeviceState], area: &Area, rng: &mut impl Rng) {
    for d in devices.iter_mut().filter(|d| d.mobile && d.speed > 0.0) {
        let dist = d.position.distance(&d.waypoint);
        if dist <= d.speed {
            d.position = d.waypoint;
            d.waypoint = area.random_point(rng);
        } else {
            let k = d.speed / dist;
            d.position = area.clamp(Point::new(
                d.position.x + k * (d.waypoint.x - d.position.x),
                d.position.y + k * (d.waypoint.y - d.position.y),
            ));
        }
    }
}

pub fn covered(device: &Point, uav: &Point, radius: f64) -> bool {
    device.distance(uav) <= radius
}

/// Fraction of devices whose associated UAV covers them.
pub fn coverage_capacity(devices: &[Point], uavs: &[Point], association: &[Option<usize>], radius: f64) -> f64 {
    if devices.is_empty() {
        return 0.0;
    }
    let hit = devices
        .iter()
        .zip(association)
        .filter(|(d, a)| a.is_some_and(|u| u < uavs.len() && covered(d, &uavs[u], radius)))
        .count();
    hit as f64 / devices.len() as f64
}

/// Nearest UAV within `radius` for each device; ties go to the lower index.
pub fn associate(devices: &[Point], uavs: &[Point], radius: f64) -> Vec<Option<usize>> {
    devices
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (u, p) in uavs.iter().enumerate() {
                let dist = d.distance(p);
                if dist <= radius && best.is_none_or(|(_, b)| dist < b) {
                    best = Some((u, dist));
                }
            }
            best.map(|(u, _)| u)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flight {
    pub distance_m: f64,
    pub energy_j: f64,
    pub reached: bool,
}

/// Flies straight toward `target`, stopping where the battery runs dry.
pub fn fly(uav: &mut UavState, target: Point, params: &EnergyParams) -> Flight {
    let requested = uav.position.distance(&target);
    if requested == 0.0 {
        return Flight {
            distance_m: 0.0,
            energy_j: 0.0,
            reached: true,
        };
    }
    let cost = params.fly_j_per_km * requested / 1000.0;
    if cost <= uav.energy {
        uav.position = target;
        uav.energy -= cost;
        uav.spent.fly += cost;
        return Flight {
            distance_m: requested,
            energy_j: cost,
            reached: true,
        };
    }
    let affordable = uav.energy * 1000.0 / params.fly_j_per_km;
    let k = affordable / requested;
    uav.position = Point::new(
        uav.position.x + k * (target.x - uav.position.x),
        uav.position.y + k * (target.y - uav.position.y),
    );
    let spent = uav.energy;
    uav.spent.fly += spent;
    uav.energy = 0.0;
    Flight {
        distance_m: affordable,
        energy_j: spent,
        reached: false,
    }
}

pub fn training_energy(k_rounds: usize, uploads: usize, params: &EnergyParams) -> f64 {
    k_rounds as f64 * params.local_round_j + uploads as f64 * params.upload_j
}

/// Slowest selected UAV's update-plus-upload time, plus aggregation and broadcast.
pub fn fed_round_time(selected: &[Point], haps: &Point, latency: &LatencyParams, k_rounds: usize) -> f64 {
    let slowest = selected
        .iter()
        .map(|p| {
            k_rounds as f64 * latency.local_round_s
                + latency.upload_base_s
                + latency.upload_per_m_s * p.distance(haps)
        })
        .fold(0.0, f64::max);
    slowest + latency.aggregation_s + latency.broadcast_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub n_uavs: usize,
    pub n_devices: usize,
    pub coverage_radius_m: f64,
    pub mobile_fraction: f64,
    pub device_speed_m: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            n_uavs: 5,
            n_devices: 30,
            coverage_radius_m: 200.0,
            mobile_fraction: 0.2,
            device_speed_m: 50.0,
        }
    }
}

/// Geometry and energy state of one simulated network.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub area: Area,
    pub scenario: ScenarioParams,
    pub energy: EnergyParams,
    pub latency: LatencyParams,
    pub devices: Vec<DeviceState>,
    pub uavs: Vec<UavState>,
    pub association: Vec<Option<usize>>,
}

impl World {
    /// Devices uniform over the area, the first `mobile_fraction` of them
    /// mobile; UAVs start evenly spaced on a ring around the HAPS point.
    pub fn random(
        area: Area,
        scenario: ScenarioParams,
        energy: EnergyParams,
        latency: LatencyParams,
        rng: &mut impl Rng,
    ) -> Self {
        let n_mobile = (scenario.n_devices as f64 * scenario.mobile_fraction).round() as usize;
        let devices = (0..scenario.n_devices)
            .map(|i| DeviceState {
                position: area.random_point(rng),
                mobile: i < n_mobile,
                speed: if i < n_mobile { scenario.device_speed_m } else { 0.0 },
                waypoint: area.random_point(rng),
            })
            .collect();
        let ring = area.side * 0.3;
        let uavs = (0..scenario.n_uavs)
            .map(|u| {
                let a = std::f64::consts::TAU * u as f64 / scenario.n_uavs.max(1) as f64;
                let p = area.clamp(Point::new(area.haps.x + ring * a.cos(), area.haps.y + ring * a.sin()));
                UavState::new(p, energy.battery_capacity_j)
            })
            .collect();
        let mut world = World {
            area,
            scenario,
            energy,
            latency,
            devices,
            uavs,
            association: Vec::new(),
        };
        world.reassociate();
        world
    }

    pub fn device_points(&self) -> Vec<Point> {
        self.devices.iter().map(|d| d.position).collect()
    }

    pub fn uav_points(&self) -> Vec<Point> {
        self.uavs.iter().map(|u| u.position).collect()
    }

    pub fn reassociate(&mut self) {
        self.association = associate(&self.device_points(), &self.uav_points(), self.scenario.coverage_radius_m);
    }

    pub fn coverage(&self) -> f64 {
        coverage_capacity(
            &self.device_points(),
            &self.uav_points(),
            &self.association,
            self.scenario.coverage_radius_m,
        )
    }

    /// Bitmask of UAVs able to afford a full participation.
    pub fn eligible_mask(&self, k_rounds: usize) -> u32 {
        self.uavs
            .iter()
            .enumerate()
            .filter(|(_, u)| self.energy.eligible(u, k_rounds))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn total_energy(&self) -> f64 {
        self.uavs.iter().map(|u| u.energy).sum()
    }

    pub fn snapshot(&self, period: usize) -> Snapshot {
        Snapshot {
            period,
            devices: self.device_points(),
            uavs: self.uav_points(),
            energies: self.uavs.iter().map(|u| u.energy).collect(),
            association: self.association.clone(),
        }
    }
}

/// One decision period's world state, exported for replay and debugging.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub period: usize,
    pub devices: Vec<Point>,
    pub uavs: Vec<Point>,
    pub energies: Vec<f64>,
    pub association: Vec<Option<usize>>,
}
