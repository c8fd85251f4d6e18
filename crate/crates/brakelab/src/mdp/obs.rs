//! Sensor observation frames and the stacked state window.

use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Number of scalar channels in one observation frame:
/// v, w1..w4, ax, ay, az, pitch/roll/yaw rates, p1..p4, f_brake, f_acc, delta.
pub const NUM_CHANNELS: usize = 18;

/// Number of stacked observation frames forming a state.
pub const STACK_LEN: usize = 20;

pub const CH_V: usize = 0;
pub const CH_W: Range<usize> = 1..5;
pub const CH_A: Range<usize> = 5..8;
pub const CH_RATE: Range<usize> = 8..11;
pub const CH_P: Range<usize> = 11..15;
pub const CH_FBRAKE: usize = 15;
pub const CH_FACC: usize = 16;
pub const CH_DELTA: usize = 17;

/// One 50 Hz sensor frame in fixed channel order and units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Vehicle speed, km/h.
    pub v_kmh: f64,
    /// Linear wheel speeds FL, FR, RL, RR, km/h.
    pub wheel_kmh: [f64; 4],
    /// Accelerations x, y, z, m/s^2 (gravity-removed convention, a_z = 0).
    pub accel: [f64; 3],
    /// Pitch, roll, yaw attitude rates, rad/s.
    pub rates: [f64; 3],
    /// Wheel cylinder pressures FL, FR, RL, RR, MPa.
    pub pressure_mpa: [f64; 4],
    /// Brake pedal force, N.
    pub f_brake_n: f64,
    /// Accelerator pedal force, N.
    pub f_acc_n: f64,
    /// Steering wheel angle, rad.
    pub delta_rad: f64,
}

impl Observation {
    pub fn zeros() -> Self {
        Self {
            v_kmh: 0.0,
            wheel_kmh: [0.0; 4],
            accel: [0.0; 3],
            rates: [0.0; 3],
            pressure_mpa: [0.0; 4],
            f_brake_n: 0.0,
            f_acc_n: 0.0,
            delta_rad: 0.0,
        }
    }

    /// Flattens to the fixed channel order.
    pub fn to_array(&self) -> [f64; NUM_CHANNELS] {
        let mut a = [0.0; NUM_CHANNELS];
        a[CH_V] = self.v_kmh;
        a[CH_W].copy_from_slice(&self.wheel_kmh);
        a[CH_A].copy_from_slice(&self.accel);
        a[CH_RATE].copy_from_slice(&self.rates);
        a[CH_P].copy_from_slice(&self.pressure_mpa);
        a[CH_FBRAKE] = self.f_brake_n;
        a[CH_FACC] = self.f_acc_n;
        a[CH_DELTA] = self.delta_rad;
        a
    }

    pub fn from_array(a: &[f64; NUM_CHANNELS]) -> Self {
        Self {
            v_kmh: a[CH_V],
            wheel_kmh: [a[1], a[2], a[3], a[4]],
            accel: [a[5], a[6], a[7]],
            rates: [a[8], a[9], a[10]],
            pressure_mpa: [a[11], a[12], a[13], a[14]],
            f_brake_n: a[CH_FBRAKE],
            f_acc_n: a[CH_FACC],
            delta_rad: a[CH_DELTA],
        }
    }

    /// Yaw rate channel, rad/s.
    pub fn yaw_rate(&self) -> f64 {
        self.rates[2]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// `STACK_LEN` consecutive observations in channel-major layout: for each
/// channel, a window of `h` values ordered oldest to newest.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedState {
    h: usize,
    data: Vec<f64>,
}

impl StackedState {
    /// Builds a window from the last `h` frames of `history`. When fewer than
    /// `h` frames exist the earliest frame is repeated to fill the window.
    pub fn from_history(history: &[Observation], h: usize) -> Option<Self> {
        if history.is_empty() || h == 0 {
            return None;
        }
        let mut data = vec![0.0; NUM_CHANNELS * h];
        for j in 0..h {
            // Index into history for window slot j (oldest first).
            let k = (history.len() + j).saturating_sub(h);
            let k = k.min(history.len() - 1);
            let frame = history[k].to_array();
            for (c, val) in frame.iter().enumerate() {
                data[c * h + j] = *val;
            }
        }
        Some(Self { h, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    /// The h-step window of one channel, oldest first.
    pub fn channel_window(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.h..(channel + 1) * self.h]
    }

    /// Channel value at window slot `j` (0 = oldest, h-1 = newest).
    pub fn at(&self, channel: usize, j: usize) -> f64 {
        self.data[channel * self.h + j]
    }

    /// The newest frame in the window.
    pub fn latest(&self) -> Observation {
        let mut a = [0.0; NUM_CHANNELS];
        for (c, slot) in a.iter_mut().enumerate() {
            *slot = self.at(c, self.h - 1);
        }
        Observation::from_array(&a)
    }

    /// Drops the oldest frame and appends `frame` as the newest.
    pub fn push(&mut self, frame: &Observation) {
        let arr = frame.to_array();
        for c in 0..NUM_CHANNELS {
            let w = &mut self.data[c * self.h..(c + 1) * self.h];
            w.copy_within(1.., 0);
            w[self.h - 1] = arr[c];
        }
    }

    /// Full channel-major flat view, length `NUM_CHANNELS * h`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn from_flat(h: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), NUM_CHANNELS * h, "flat stacked state length");
        Self { h, data }
    }

    /// Adds `v_aug` to every element of the vehicle-speed window and all four
    /// wheel-speed windows, leaving every other channel untouched.
    pub fn speed_augmented(&self, v_aug: f64) -> Self {
        let mut out = self.clone();
        for c in CH_V..CH_W.end {
            for j in 0..self.h {
                out.data[c * self.h + j] += v_aug;
            }
        }
        out
    }
}

/// Stacks the last `h` observations of `history` into a state window.
pub fn stack(history: &[Observation], h: usize) -> Result<StackedState, EmptyHistory> {
    StackedState::from_history(history, h).ok_or(EmptyHistory)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyHistory;

impl std::fmt::Display for EmptyHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot stack an empty observation history")
    }
}

impl std::error::Error for EmptyHistory {}
