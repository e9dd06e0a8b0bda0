//! Safeguarded Newton iteration for strictly monotone scalar equations.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

/// Largest |u| explored while bracketing. In log-determinant coordinates
/// this is far beyond anything representable as a determinant.
const BRACKET_LIMIT: f64 = 1.0e4;

/// Finds the root of a strictly increasing function `g` given as
/// `u ↦ (g(u), g′(u))`, starting from `u0`.
///
/// The root is first bracketed by geometric expansion away from `u0`; Newton
/// steps that leave the bracket (or meet a non-positive derivative) fall back
/// to bisection.
pub fn solve_increasing<G>(g: G, u0: f64) -> Result<f64>
where
    G: Fn(f64) -> (f64, f64),
{
    let (g0, _) = g(u0);
    if g0 == 0.0 {
        return Ok(u0);
    }
    if !g0.is_finite() {
        return Err(Error::RootNotBracketed);
    }

    // Bracket: g(lo) < 0 < g(hi).
    let (mut lo, mut hi) = {
        let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
        let mut step = 1.0;
        let mut prev = u0;
        loop {
            let u = u0 + dir * step;
            if u.abs() > BRACKET_LIMIT {
                return Err(Error::RootNotBracketed);
            }
            let (gu, _) = g(u);
            if gu.is_nan() {
                return Err(Error::RootNotBracketed);
            }
            if gu == 0.0 {
                return Ok(u);
            }
            if (gu > 0.0) != (g0 > 0.0) {
                break if dir > 0.0 { (prev, u) } else { (u, prev) };
            }
            prev = u;
            step *= 2.0;
        }
    };

    let mut u = u0.clamp(lo, hi);
    for _ in 0..MAX_ITERATIONS {
        let (gu, dgu) = g(u);
        if gu == 0.0 {
            return Ok(u);
        }
        if gu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - gu / dgu;
        let next = if dgu > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let scale = next.abs().max(1.0);
        if (next - u).abs() <= 4.0 * f64::EPSILON * scale || (hi - lo) <= 4.0 * f64::EPSILON * scale {
            return Ok(next);
        }
        u = next;
    }
    Err(Error::MaxIterations(MAX_ITERATIONS))
}
