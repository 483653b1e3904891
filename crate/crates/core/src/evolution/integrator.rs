//! Explicit Runge–Kutta integrators over flat `f64` state buffers.
//!
//! The adaptive method is the Dormand–Prince 8(5,3) pair with the step-size
//! control of Hairer's DOP853; classic fixed-step RK4 is kept as an
//! independent cross-check.

use serde::{Deserialize, Serialize};

/// A first-order system `dy/dt = f(t, y)` on a flat real buffer.
pub(crate) trait OdeSystem {
    fn len(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdaptiveSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Sample intervals re-integrated at tightened tolerances.
    #[serde(default)]
    pub retries: usize,
}

impl std::ops::AddAssign for IntegrationStats {
    fn add_assign(&mut self, o: Self) {
        self.steps += o.steps;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
        self.retries += o.retries;
    }
}

#[derive(Debug)]
pub(crate) enum StepFailure {
    StepUnderflow { time: f64 },
    NonFinite { time: f64 },
}

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

const STAGES: usize = 12;

const C: [f64; STAGES] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

const A: [[f64; STAGES]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        0.05260015195876773,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.0197250569845379,
        0.0591751709536137,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.02958758547680685,
        0.0,
        0.08876275643042054,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.2413651341592667,
        0.0,
        -0.8845494793282861,
        0.924834003261792,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037037037037037035,
        0.0,
        0.0,
        0.17082860872947386,
        0.12546768756682242,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.037109375,
        0.0,
        0.0,
        0.17025221101954405,
        0.06021653898045596,
        -0.017578125,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.03709200011850479,
        0.0,
        0.0,
        0.17038392571223998,
        0.10726203044637328,
        -0.015319437748624402,
        0.008273789163814023,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.6241109587160757,
        0.0,
        0.0,
        -3.3608926294469414,
        -0.868219346841726,
        27.59209969944671,
        20.154067550477894,
        -43.48988418106996,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.47766253643826434,
        0.0,
        0.0,
        -2.4881146199716677,
        -0.590290826836843,
        21.230051448181193,
        15.279233632882423,
        -33.28821096898486,
        -0.020331201708508627,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.9371424300859873,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -18.52006565999696,
        22.739487099350505,
        2.4936055526796523,
        -3.0467644718982196,
        0.0,
        0.0,
    ],
    [
        2.273310147516538,
        0.0,
        0.0,
        -10.53449546673725,
        -2.0008720582248625,
        -17.9589318631188,
        27.94888452941996,
        -2.8589982771350235,
        -8.87285693353063,
        12.360567175794303,
        0.6433927460157636,
        0.0,
    ],
];

const B: [f64; STAGES] = [
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
];

const E3: [f64; STAGES + 1] = [
    -0.18980075407240762,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    -0.4226823213237919,
    -0.1521609496625161,
    0.20136540080403034,
    0.02265179219836082,
    0.0,
];

const E5: [f64; STAGES + 1] = [
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130175,
    0.08192320648511571,
    -0.022355307863886294,
    0.0,
];

/// Stateful DOP853 stepper that carries its step size and FSAL derivative
/// across successive calls to [`Dop853::advance`].
pub(crate) struct Dop853 {
    settings: AdaptiveSettings,
    h: Option<f64>,
    k: Vec<Vec<f64>>,
    f_valid: bool,
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    scratch: Vec<f64>,
    pub stats: IntegrationStats,
}

impl Dop853 {
    pub fn new(n: usize, settings: AdaptiveSettings) -> Self {
        Self {
            settings,
            h: None,
            k: vec![vec![0.0; n]; STAGES + 1],
            f_valid: false,
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
            scratch: vec![0.0; n],
            stats: IntegrationStats::default(),
        }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.settings.abs_tol + self.settings.rel_tol * a.abs().max(b.abs())
    }

    /// Hairer's starting-step heuristic.
    fn initial_step<S: OdeSystem>(&mut self, sys: &mut S, t: f64, y: &[f64], span: f64) -> f64 {
        let n = y.len();
        let f0 = &self.k[0];
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..n {
            let sc = self.scale(y[i], y[i]);
            d0 += (y[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        for i in 0..n {
            self.scratch[i] = y[i] + h0 * f0[i];
        }
        sys.rhs(t + h0, &self.scratch, &mut self.y_stage);
        self.stats.rhs_evals += 1;
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.scale(y[i], y[i]);
            d2 += ((self.y_stage[i] - f0[i]) / sc).powi(2);
        }
        let d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(span).min(self.settings.max_step)
    }

    /// Integrates `y` in place from `t` to `t_end`.
    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t: f64,
        t_end: f64,
        y: &mut [f64],
    ) -> Result<(), StepFailure> {
        let n = y.len();
        let mut t = t;
        if !self.f_valid {
            let (k0, _) = self.k.split_at_mut(1);
            sys.rhs(t, y, &mut k0[0]);
            self.stats.rhs_evals += 1;
            self.f_valid = true;
        }
        let mut h_abs = match self.h {
            Some(h) => h,
            None => self.initial_step(sys, t, y, t_end - t),
        };
        while t < t_end {
            let remaining = t_end - t;
            let min_step = 10.0 * (next_up(t) - t);
            h_abs = h_abs.min(self.settings.max_step).max(min_step);
            let mut rejected_once = false;
            loop {
                let clipped = h_abs >= remaining;
                let h = if clipped { remaining } else { h_abs };
                if h < min_step && !clipped {
                    return Err(StepFailure::StepUnderflow { time: t });
                }
                self.stage_pass(sys, t, h, y);
                let err = self.error_norm(h, y);
                if !err.is_finite() {
                    if h <= min_step {
                        return Err(StepFailure::NonFinite { time: t });
                    }
                    h_abs = h * MIN_FACTOR;
                    rejected_once = true;
                    self.stats.rejected += 1;
                    continue;
                }
                if err <= 1.0 {
                    let mut factor = if err == 0.0 {
                        MAX_FACTOR
                    } else {
                        (SAFETY * err.powf(ERROR_EXPONENT)).min(MAX_FACTOR)
                    };
                    if rejected_once {
                        factor = factor.min(1.0);
                    }
                    t = if clipped { t_end } else { t + h };
                    y.copy_from_slice(&self.y_new);
                    let (head, tail) = self.k.split_at_mut(STAGES);
                    head[0].copy_from_slice(&tail[0]);
                    self.stats.steps += 1;
                    // A clipped step says nothing about the natural step size.
                    if !clipped {
                        h_abs = h * factor;
                    }
                    break;
                }
                h_abs = h * (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR);
                rejected_once = true;
                self.stats.rejected += 1;
            }
        }
        self.h = Some(h_abs);
        debug_assert_eq!(y.len(), n);
        Ok(())
    }

    fn stage_pass<S: OdeSystem>(&mut self, sys: &mut S, t: f64, h: f64, y: &[f64]) {
        let n = y.len();
        for s in 1..STAGES {
            self.y_stage.copy_from_slice(y);
            for (j, &a) in A[s][..s].iter().enumerate() {
                if a != 0.0 {
                    let ha = h * a;
                    for (ys, kj) in self.y_stage.iter_mut().zip(&self.k[j]) {
                        *ys += ha * kj;
                    }
                }
            }
            let (done, rest) = self.k.split_at_mut(s);
            let _ = done;
            sys.rhs(t + C[s] * h, &self.y_stage, &mut rest[0]);
        }
        self.y_new.copy_from_slice(y);
        for (j, &b) in B.iter().enumerate() {
            if b != 0.0 {
                let hb = h * b;
                for (yn, kj) in self.y_new.iter_mut().zip(&self.k[j]) {
                    *yn += hb * kj;
                }
            }
        }
        let (_, last) = self.k.split_at_mut(STAGES);
        sys.rhs(t + h, &self.y_new, &mut last[0]);
        self.stats.rhs_evals += STAGES;
        debug_assert_eq!(self.y_new.len(), n);
    }

    fn error_norm(&self, h: f64, y: &[f64]) -> f64 {
        let n = y.len();
        let (mut e5, mut e3) = (0.0, 0.0);
        for (i, (&yi, &yn)) in y.iter().zip(&self.y_new).enumerate() {
            let sc = self.scale(yi, yn);
            let (mut a5, mut a3) = (0.0, 0.0);
            for j in 0..=STAGES {
                let kj = self.k[j][i];
                a5 += E5[j] * kj;
                a3 += E3[j] * kj;
            }
            e5 += (a5 / sc).powi(2);
            e3 += (a3 / sc).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / (((e5 + 0.01 * e3) * n as f64).sqrt())
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    let bits = x.to_bits();
    let next = if x == 0.0 {
        1
    } else if x > 0.0 {
        bits + 1
    } else {
        bits - 1
    };
    f64::from_bits(next)
}

/// Classic fourth-order Runge–Kutta with a uniform step no larger than `max_step`.
pub(crate) struct Rk4 {
    max_step: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    pub stats: IntegrationStats,
}

impl Rk4 {
    pub fn new(n: usize, max_step: f64) -> Self {
        Self {
            max_step,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
            stats: IntegrationStats::default(),
        }
    }

    pub fn advance<S: OdeSystem>(
        &mut self,
        sys: &mut S,
        t0: f64,
        t_end: f64,
        y: &mut [f64],
    ) -> Result<(), StepFailure> {
        let span = t_end - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let steps = (span / self.max_step).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            sys.rhs(t, y, &mut self.k[0]);
            combine(&mut self.tmp, y, 0.5 * h, &self.k[0]);
            sys.rhs(t + 0.5 * h, &self.tmp, &mut self.k[1]);
            combine(&mut self.tmp, y, 0.5 * h, &self.k[1]);
            sys.rhs(t + 0.5 * h, &self.tmp, &mut self.k[2]);
            combine(&mut self.tmp, y, h, &self.k[2]);
            sys.rhs(t + h, &self.tmp, &mut self.k[3]);
            let w = h / 6.0;
            for (idx, yi) in y.iter_mut().enumerate() {
                *yi += w
                    * (self.k[0][idx]
                        + 2.0 * self.k[1][idx]
                        + 2.0 * self.k[2][idx]
                        + self.k[3][idx]);
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(StepFailure::NonFinite { time: t + h });
            }
            self.stats.steps += 1;
            self.stats.rhs_evals += 4;
        }
        Ok(())
    }
}

fn combine(out: &mut [f64], y: &[f64], h: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + h * ki;
    }
}
