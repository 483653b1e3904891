//! Right-hand sides of the master and Schrödinger equations on split
//! real/imaginary planes, laid out row-major as `[re..., im...]`.

use super::integrator::OdeSystem;
use super::LindbladKind;
use crate::linalg::{c, CMatrix, CVector};

/// `H(t) = H_D + (t/T)(H_P - H_D)` stored as planes.
pub(crate) struct LinearHamiltonian {
    dim: usize,
    start_re: Vec<f64>,
    start_im: Vec<f64>,
    slope_re: Vec<f64>,
    slope_im: Vec<f64>,
    total_time: f64,
    real: bool,
    h_re: Vec<f64>,
    h_im: Vec<f64>,
}

impl LinearHamiltonian {
    pub fn new(driver: &CMatrix, problem: &CMatrix, total_time: f64) -> Self {
        let dim = driver.nrows();
        let mut start_re = vec![0.0; dim * dim];
        let mut start_im = vec![0.0; dim * dim];
        let mut slope_re = vec![0.0; dim * dim];
        let mut slope_im = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let d = driver[(i, j)];
                let p = problem[(i, j)];
                start_re[i * dim + j] = d.re;
                start_im[i * dim + j] = d.im;
                slope_re[i * dim + j] = p.re - d.re;
                slope_im[i * dim + j] = p.im - d.im;
            }
        }
        let real = start_im.iter().chain(&slope_im).all(|&x| x == 0.0);
        Self {
            dim,
            start_re,
            start_im,
            slope_re,
            slope_im,
            total_time,
            real,
            h_re: vec![0.0; dim * dim],
            h_im: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn update(&mut self, t: f64) {
        let s = t / self.total_time;
        for ((h, a), b) in self.h_re.iter_mut().zip(&self.start_re).zip(&self.slope_re) {
            *h = a + s * b;
        }
        if !self.real {
            for ((h, a), b) in self.h_im.iter_mut().zip(&self.start_im).zip(&self.slope_im) {
                *h = a + s * b;
            }
        }
    }
}

/// `C += A·B` for `d×d` complex matrices in planes; `a_real` skips `Im A`.
#[allow(clippy::too_many_arguments)]
fn matmul_acc(
    d: usize,
    a_re: &[f64],
    a_im: &[f64],
    a_real: bool,
    b_re: &[f64],
    b_im: &[f64],
    c_re: &mut [f64],
    c_im: &mut [f64],
) {
    for i in 0..d {
        let cr = &mut c_re[i * d..(i + 1) * d];
        let ci = &mut c_im[i * d..(i + 1) * d];
        for k in 0..d {
            let ar = a_re[i * d + k];
            let br = &b_re[k * d..(k + 1) * d];
            let bi = &b_im[k * d..(k + 1) * d];
            if a_real {
                if ar == 0.0 {
                    continue;
                }
                for ((x, y), (r, m)) in cr.iter_mut().zip(ci.iter_mut()).zip(br.iter().zip(bi)) {
                    *x += ar * r;
                    *y += ar * m;
                }
            } else {
                let ai = a_im[i * d + k];
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                for ((x, y), (r, m)) in cr.iter_mut().zip(ci.iter_mut()).zip(br.iter().zip(bi)) {
                    *x += ar * r - ai * m;
                    *y += ar * m + ai * r;
                }
            }
        }
    }
}

/// Dephasing-type dissipator `γ Σ_n (σ_n ρ σ_n - ρ)` for an involutive `σ`.
pub(crate) enum Dissipator {
    None,
    /// `σz`: elementwise damping `-γ·2·hamming(a, b)`, precomputed per element.
    Diagonal(Vec<f64>),
    /// `σx` (`signed = false`) or `σy` (`signed = true`) on the listed bit shifts.
    Flip {
        rate: f64,
        shifts: Vec<usize>,
        signed: bool,
    },
}

impl Dissipator {
    /// Builds the dissipator over `basis`, the parent computational indices of
    /// the rows (the identity for full-space evolution).
    pub fn new(kind: LindbladKind, rate: f64, sites: usize, basis: &[usize]) -> Self {
        if rate == 0.0 {
            return Dissipator::None;
        }
        match kind {
            LindbladKind::Z => {
                let d = basis.len();
                let mut w = vec![0.0; d * d];
                for (i, &a) in basis.iter().enumerate() {
                    for (j, &b) in basis.iter().enumerate() {
                        w[i * d + j] = -rate * 2.0 * (a ^ b).count_ones() as f64;
                    }
                }
                Dissipator::Diagonal(w)
            }
            LindbladKind::X | LindbladKind::Y => {
                debug_assert_eq!(basis.len(), 1 << sites);
                Dissipator::Flip {
                    rate,
                    shifts: (0..sites).collect(),
                    signed: kind == LindbladKind::Y,
                }
            }
        }
    }

    fn apply(&self, d: usize, re: &[f64], im: &[f64], dre: &mut [f64], dim: &mut [f64]) {
        match self {
            Dissipator::None => {}
            Dissipator::Diagonal(w) => {
                for (((o, x), wi), (p, y)) in
                    dre.iter_mut().zip(re).zip(w).zip(dim.iter_mut().zip(im))
                {
                    *o += wi * x;
                    *p += wi * y;
                }
            }
            Dissipator::Flip {
                rate,
                shifts,
                signed,
            } => {
                let n = shifts.len() as f64;
                for a in 0..d {
                    for b in 0..d {
                        let ab = a * d + b;
                        let mut sr = -n * re[ab];
                        let mut si = -n * im[ab];
                        for &sh in shifts {
                            let (fa, fb) = (a ^ (1 << sh), b ^ (1 << sh));
                            let sign = if *signed && ((a >> sh) & 1) != ((b >> sh) & 1) {
                                -1.0
                            } else {
                                1.0
                            };
                            sr += sign * re[fa * d + fb];
                            si += sign * im[fa * d + fb];
                        }
                        dre[ab] += rate * sr;
                        dim[ab] += rate * si;
                    }
                }
            }
        }
    }
}

/// `dρ/dt = -i[H(t), ρ] + D(ρ)` for Hermitian `ρ`.
pub(crate) struct GkslSystem {
    pub hamiltonian: LinearHamiltonian,
    pub dissipator: Dissipator,
    c_re: Vec<f64>,
    c_im: Vec<f64>,
}

impl GkslSystem {
    pub fn new(hamiltonian: LinearHamiltonian, dissipator: Dissipator) -> Self {
        let n = hamiltonian.dim() * hamiltonian.dim();
        Self {
            hamiltonian,
            dissipator,
            c_re: vec![0.0; n],
            c_im: vec![0.0; n],
        }
    }
}

impl OdeSystem for GkslSystem {
    fn len(&self) -> usize {
        2 * self.hamiltonian.dim * self.hamiltonian.dim
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.hamiltonian.dim;
        let n = d * d;
        self.hamiltonian.update(t);
        let (re, im) = y.split_at(n);
        let (dre, dim) = dy.split_at_mut(n);
        self.c_re.fill(0.0);
        self.c_im.fill(0.0);
        let h = &self.hamiltonian;
        matmul_acc(
            d,
            &h.h_re,
            &h.h_im,
            h.real,
            re,
            im,
            &mut self.c_re,
            &mut self.c_im,
        );
        // With C = Hρ and ρ = ρ†: -i[H, ρ] = -i(C - C†).
        for a in 0..d {
            for b in 0..d {
                let ab = a * d + b;
                let ba = b * d + a;
                dre[ab] = self.c_im[ab] + self.c_im[ba];
                dim[ab] = self.c_re[ba] - self.c_re[ab];
            }
        }
        self.dissipator.apply(d, re, im, dre, dim);
    }
}

/// `dψ/dt = -i H(t) ψ`.
pub(crate) struct SchrodingerSystem {
    pub hamiltonian: LinearHamiltonian,
}

impl OdeSystem for SchrodingerSystem {
    fn len(&self) -> usize {
        2 * self.hamiltonian.dim
    }

    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.hamiltonian.dim;
        self.hamiltonian.update(t);
        let (re, im) = y.split_at(d);
        let (dre, dim) = dy.split_at_mut(d);
        let h = &self.hamiltonian;
        for i in 0..d {
            let row_re = &h.h_re[i * d..(i + 1) * d];
            let (mut hr, mut hi) = (0.0, 0.0);
            if h.real {
                for ((a, x), y) in row_re.iter().zip(re).zip(im) {
                    hr += a * x;
                    hi += a * y;
                }
            } else {
                let row_im = &h.h_im[i * d..(i + 1) * d];
                for (((a, b), x), y) in row_re.iter().zip(row_im).zip(re).zip(im) {
                    hr += a * x - b * y;
                    hi += a * y + b * x;
                }
            }
            // -i(hr + i hi) = hi - i hr
            dre[i] = hi;
            dim[i] = -hr;
        }
    }
}

pub(crate) fn matrix_to_planes(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut y = vec![0.0; 2 * d * d];
    for i in 0..d {
        for j in 0..d {
            y[i * d + j] = m[(i, j)].re;
            y[d * d + i * d + j] = m[(i, j)].im;
        }
    }
    y
}

pub(crate) fn planes_to_matrix(y: &[f64], d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| c(y[i * d + j], y[d * d + i * d + j]))
}

pub(crate) fn vector_to_planes(v: &CVector) -> Vec<f64> {
    let d = v.len();
    let mut y = vec![0.0; 2 * d];
    for (i, z) in v.iter().enumerate() {
        y[i] = z.re;
        y[d + i] = z.im;
    }
    y
}

pub(crate) fn planes_to_vector(y: &[f64], d: usize) -> CVector {
    CVector::from_fn(d, |i, _| c(y[i], y[d + i]))
}
