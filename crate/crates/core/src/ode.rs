//! Classical fourth-order Runge–Kutta stepping over flat state vectors.
//!
//! Two drivers share the same stage arithmetic: a plain fixed step used by the
//! linear Lindblad flow, and a step-doubling controller used by the nonlinear
//! flows, whose slowest modes can be many orders of magnitude slower than the
//! fastest ones.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar field of a state vector.
pub(crate) trait Scalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Stage buffers for one RK4 step.
pub(crate) struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Scalar> Rk4<T> {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            k1: vec![T::default(); len],
            k2: vec![T::default(); len],
            k3: vec![T::default(); len],
            k4: vec![T::default(); len],
            tmp: vec![T::default(); len],
        }
    }

    /// `out = y + h * Φ(y)` given the precomputed slope `k1 = f(y)`.
    fn step_from<F>(&mut self, f: &mut F, y: &[T], k1: &[T], h: f64, out: &mut [T])
    where
        F: FnMut(&[T], &mut [T]),
    {
        let n = y.len();
        for i in 0..n {
            self.tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + self.k2[i] * (0.5 * h);
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + self.k3[i] * h;
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            out[i] = y[i] + (k1[i] + self.k2[i] * 2.0 + self.k3[i] * 2.0 + self.k4[i]) * (h / 6.0);
        }
    }

    /// One fixed step of size `h`.
    pub(crate) fn step<F>(&mut self, f: &mut F, y: &[T], h: f64, out: &mut [T])
    where
        F: FnMut(&[T], &mut [T]),
    {
        let mut k1 = core::mem::take(&mut self.k1);
        f(y, &mut k1);
        self.step_from(f, y, &k1, h, out);
        self.k1 = k1;
    }
}

/// Local error tolerances for [`AdaptiveRk4`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
}

/// RK4 with step-doubling error control.
pub(crate) struct AdaptiveRk4<T> {
    rk: Rk4<T>,
    control: StepControl,
    h: f64,
    slope: Vec<T>,
    full: Vec<T>,
    half: Vec<T>,
    candidate: Vec<T>,
    mid_slope: Vec<T>,
    pub(crate) accepted: usize,
}

impl<T: Scalar> AdaptiveRk4<T> {
    pub(crate) fn new(len: usize, control: StepControl) -> Self {
        Self {
            rk: Rk4::new(len),
            control,
            h: control.initial_step.min(control.max_step),
            slope: vec![T::default(); len],
            full: vec![T::default(); len],
            half: vec![T::default(); len],
            candidate: vec![T::default(); len],
            mid_slope: vec![T::default(); len],
            accepted: 0,
        }
    }

    /// Advances `(t, y)` by one accepted step no longer than `h_limit`.
    ///
    /// `admissible` may veto a candidate state; a veto halves the step like an
    /// error-test failure.
    pub(crate) fn advance<F, A>(
        &mut self,
        f: &mut F,
        admissible: &mut A,
        t: &mut f64,
        y: &mut [T],
        h_limit: f64,
    ) -> Result<()>
    where
        F: FnMut(&[T], &mut [T]),
        A: FnMut(&[T]) -> bool,
    {
        f(y, &mut self.slope);
        loop {
            let h = self.h.min(h_limit);
            if !(h > 1e-14 * t.abs().max(1.0)) {
                return Err(Error::StepUnderflow { t: *t });
            }
            self.rk.step_from(f, y, &self.slope, h, &mut self.full);
            self.rk.step_from(f, y, &self.slope, 0.5 * h, &mut self.half);
            f(&self.half, &mut self.mid_slope);
            self.rk
                .step_from(f, &self.half, &self.mid_slope, 0.5 * h, &mut self.candidate);

            let mut err: f64 = 0.0;
            let mut finite = true;
            for i in 0..y.len() {
                let c = self.candidate[i];
                let diff = (c + self.full[i] * -1.0).magnitude() / 15.0;
                let scale = self.control.abs_tol
                    + self.control.rel_tol * y[i].magnitude().max(c.magnitude());
                if !diff.is_finite() {
                    finite = false;
                }
                err = err.max(diff / scale);
            }

            if finite && err <= 1.0 && admissible(&self.candidate) {
                y.copy_from_slice(&self.candidate);
                *t += h;
                self.accepted += 1;
                let growth = if err == 0.0 {
                    4.0
                } else {
                    (0.9 * libm::pow(err, -0.2)).clamp(0.2, 4.0)
                };
                // a step clipped by h_limit says nothing about the controller's choice
                if h == self.h {
                    self.h = (h * growth).min(self.control.max_step);
                }
                return Ok(());
            }
            let shrink = if finite && err > 1.0 {
                (0.9 * libm::pow(err, -0.25)).clamp(0.1, 0.5)
            } else {
                0.5
            };
            self.h = h * shrink;
        }
    }
}
