//! Analytic desired position trajectories with four derivatives.

use serde::{Deserialize, Serialize};

use crate::rigid_body::{Vec3, Vec6};

/// `p_d` and its first four time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub jerk: Vec3,
    pub snap: Vec3,
}

fn stack(top: &Vec3, bottom: &Vec3) -> Vec6 {
    Vec6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

impl TrajectorySample {
    /// `x_d = [p_d; ṗ_d]`
    pub fn x(&self) -> Vec6 {
        stack(&self.p, &self.v)
    }

    /// `ẋ_d = [ṗ_d; p̈_d]`
    pub fn x_dot(&self) -> Vec6 {
        stack(&self.v, &self.a)
    }

    /// `ẍ_d = [p̈_d; p_d⁽³⁾]`
    pub fn x_ddot(&self) -> Vec6 {
        stack(&self.a, &self.jerk)
    }
}

pub trait DesiredTrajectory {
    fn sample(&self, t: f64) -> TrajectorySample;
}

/// One coordinate `offset + rate·t + amplitude·sin(frequency·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AxisWave {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub offset: f64,
    pub rate: f64,
}

impl AxisWave {
    pub fn sine(amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Self {
        AxisWave {
            amplitude,
            frequency,
            phase,
            offset,
            rate: 0.0,
        }
    }

    pub fn constant(offset: f64) -> Self {
        AxisWave {
            offset,
            ..Default::default()
        }
    }

    /// Value and derivatives of order 0..=4.
    fn derivatives(&self, t: f64) -> [f64; 5] {
        let arg = self.frequency * t + self.phase;
        let (s, c) = arg.sin_cos();
        let w = self.frequency;
        let a = self.amplitude;
        [
            self.offset + self.rate * t + a * s,
            self.rate + a * w * c,
            -a * w * w * s,
            -a * w * w * w * c,
            a * w * w * w * w * s,
        ]
    }
}

/// Independent sinusoid per axis; covers circles, helices and Lissajous curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalTrajectory {
    pub axes: [AxisWave; 3],
}

impl SinusoidalTrajectory {
    /// `[1.2 sin 2t, 1.2 cos 2t − 1.2, 0.6 sin t]`, starting at the origin.
    pub fn reference() -> Self {
        let mut t = Self::circle(1.2, 2.0, 0.0);
        t.axes[2] = AxisWave::sine(0.6, 1.0, 0.0, 0.0);
        t
    }

    /// Horizontal circle through the origin at `height`.
    pub fn circle(radius: f64, frequency: f64, height: f64) -> Self {
        SinusoidalTrajectory {
            axes: [
                AxisWave::sine(radius, frequency, 0.0, 0.0),
                AxisWave::sine(radius, frequency, std::f64::consts::FRAC_PI_2, -radius),
                AxisWave::constant(height),
            ],
        }
    }

    pub fn helix(radius: f64, frequency: f64, climb_rate: f64) -> Self {
        let mut t = Self::circle(radius, frequency, 0.0);
        t.axes[2].rate = climb_rate;
        t
    }

    pub fn lissajous(amplitude: [f64; 3], frequency: [f64; 3], phase: [f64; 3]) -> Self {
        SinusoidalTrajectory {
            axes: std::array::from_fn(|i| AxisWave::sine(amplitude[i], frequency[i], phase[i], 0.0)),
        }
    }

    pub fn hover(point: [f64; 3]) -> Self {
        SinusoidalTrajectory {
            axes: point.map(AxisWave::constant),
        }
    }
}

impl DesiredTrajectory for SinusoidalTrajectory {
    fn sample(&self, t: f64) -> TrajectorySample {
        let d = self.axes.map(|ax| ax.derivatives(t));
        let v = |k: usize| Vec3::new(d[0][k], d[1][k], d[2][k]);
        TrajectorySample {
            p: v(0),
            v: v(1),
            a: v(2),
            jerk: v(3),
            snap: v(4),
        }
    }
}

/// Serializable trajectory choice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// `[1.2 sin 2t, 1.2 cos 2t − 1.2, 0.6 sin t]`
    #[default]
    Reference,
    Circle {
        radius: f64,
        frequency: f64,
        #[serde(default)]
        height: f64,
    },
    Helix {
        radius: f64,
        frequency: f64,
        climb_rate: f64,
    },
    Lissajous {
        amplitude: [f64; 3],
        frequency: [f64; 3],
        #[serde(default)]
        phase: [f64; 3],
    },
    Hover {
        position: [f64; 3],
    },
    Custom {
        axes: [AxisWave; 3],
    },
}


impl TrajectorySpec {
    pub fn build(&self) -> SinusoidalTrajectory {
        match self {
            TrajectorySpec::Reference => SinusoidalTrajectory::reference(),
            TrajectorySpec::Circle {
                radius,
                frequency,
                height,
            } => SinusoidalTrajectory::circle(*radius, *frequency, *height),
            TrajectorySpec::Helix {
                radius,
                frequency,
                climb_rate,
            } => SinusoidalTrajectory::helix(*radius, *frequency, *climb_rate),
            TrajectorySpec::Lissajous {
                amplitude,
                frequency,
                phase,
            } => SinusoidalTrajectory::lissajous(*amplitude, *frequency, *phase),
            TrajectorySpec::Hover { position } => SinusoidalTrajectory::hover(*position),
            TrajectorySpec::Custom { axes } => SinusoidalTrajectory { axes: *axes },
        }
    }

    pub fn is_finite(&self) -> bool {
        let s = self.build();
        s.axes.iter().all(|a| {
            [a.amplitude, a.frequency, a.phase, a.offset, a.rate]
                .iter()
                .all(|x| x.is_finite())
        })
    }
}
