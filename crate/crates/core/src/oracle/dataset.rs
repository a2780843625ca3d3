use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::OracleError;
use crate::rigid_body::{gyroscopic, BodyState, Mat3, Vec3, Vec6, VehicleParams};

pub const DEFAULT_CAPACITY: usize = 4096;

pub const DATASET_HEADER: [&str; 25] = [
    "t", "px", "py", "pz", "vx", "vy", "vz", "wx", "wy", "wz", "R11", "R12", "R13", "R21", "R22",
    "R23", "R31", "R32", "R33", "y1", "y2", "y3", "y4", "y5", "y6",
];

/// A measured state with the residual force (first three) and torque (last
/// three) that the oracle should reproduce there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPoint {
    pub t: f64,
    pub state: BodyState,
    pub y: Vec6,
}

/// Inverts the equations of motion at a measured acceleration:
/// `y = [m·p̈ − R·e·u; J·ω̇ − (Jω)×ω − τ] + ε` with `ε ~ N(0, noise_std²·I₆)`.
#[allow(clippy::too_many_arguments)]
pub fn build_training_point<R: Rng + ?Sized>(
    t: f64,
    state: &BodyState,
    accel: &Vec3,
    omega_dot: &Vec3,
    u: f64,
    tau: &Vec3,
    params: &VehicleParams,
    noise_std: f64,
    rng: &mut R,
) -> TrainingPoint {
    let force = accel * params.mass() - state.r * params.thrust_axis() * u;
    let torque = params.inertia() * omega_dot - gyroscopic(params, &state.omega) - tau;
    let mut y = Vec6::new(force.x, force.y, force.z, torque.x, torque.y, torque.z);
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite noise level");
        for yi in y.iter_mut() {
            *yi += normal.sample(rng);
        }
    }
    TrainingPoint {
        t,
        state: *state,
        y,
    }
}

/// Append-only training set `D_n` with a hard capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<TrainingPoint>,
    index: usize,
    capacity: usize,
}

impl Default for Dataset {
    fn default() -> Self {
        Dataset::with_capacity(DEFAULT_CAPACITY)
    }
}

impl Dataset {
    pub fn with_capacity(capacity: usize) -> Self {
        Dataset {
            points: Vec::new(),
            index: 0,
            capacity,
        }
    }

    pub fn from_points(points: Vec<TrainingPoint>) -> Result<Self, OracleError> {
        let mut data = Dataset::default();
        data.extend(points)?;
        Ok(data)
    }

    /// Appends a batch and advances the set index `n`.
    pub fn extend<I: IntoIterator<Item = TrainingPoint>>(&mut self, batch: I) -> Result<(), OracleError> {
        let before = self.points.len();
        self.points.extend(batch);
        if self.points.len() > self.capacity {
            self.points.truncate(before);
            return Err(OracleError::CapacityExceeded {
                capacity: self.capacity,
            });
        }
        self.index += 1;
        Ok(())
    }

    pub fn points(&self) -> &[TrainingPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_dataset_csv<W: Write>(points: &[TrainingPoint], out: W) -> Result<(), OracleError> {
    let io = |e: csv::Error| OracleError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER).map_err(io)?;
    for pt in points {
        let s = &pt.state;
        let mut row = Vec::with_capacity(DATASET_HEADER.len());
        row.push(fmt17(pt.t));
        row.extend(s.p.iter().chain(s.v.iter()).chain(s.omega.iter()).map(|x| fmt17(*x)));
        for i in 0..3 {
            for j in 0..3 {
                row.push(fmt17(s.r[(i, j)]));
            }
        }
        row.extend(pt.y.iter().map(|x| fmt17(*x)));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| OracleError::Io(e.to_string()))
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Vec<TrainingPoint>, OracleError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| OracleError::Io(e.to_string()))?;
    if header.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(OracleError::Io(format!("unexpected header: {header:?}")));
    }
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| OracleError::Io(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| OracleError::Io(format!("row {}: {e}", line + 1)))?;
        if vals.len() != DATASET_HEADER.len() {
            return Err(OracleError::Dimension {
                expected: DATASET_HEADER.len(),
                got: vals.len(),
            });
        }
        let v3 = |k: usize| Vec3::new(vals[k], vals[k + 1], vals[k + 2]);
        points.push(TrainingPoint {
            t: vals[0],
            state: BodyState {
                p: v3(1),
                v: v3(4),
                omega: v3(7),
                r: Mat3::from_row_slice(&vals[10..19]),
            },
            y: Vec6::from_row_slice(&vals[19..25]),
        });
    }
    Ok(points)
}
