//! Fixed-point ball arithmetic on big integers.
//!
//! A [`Ball`] at precision p stands for the interval mid·2⁻ᵖ ± rad·2⁻ᵖ. Every
//! operation widens the radius so that the true result stays inside.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct Ball {
    mid: BigInt,
    rad: BigUint,
    prec: u32,
}

impl fmt::Debug for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ball({} ± {:e})", self.to_f64(), self.rad_f64())
    }
}

/// ceil(x / 2^p) for a non-negative integer.
fn shr_ceil(x: &BigUint, p: u32) -> BigUint {
    if x.is_zero() {
        return BigUint::zero();
    }
    let q: BigUint = x >> p;
    if (&q << p) == *x {
        q
    } else {
        q + 1u32
    }
}

/// Rounds x·2^-p to the nearest integer.
fn shr_round(x: &BigInt, p: u32) -> BigInt {
    if p == 0 {
        return x.clone();
    }
    let half = BigInt::one() << (p - 1);
    (x + half) >> p
}

impl Ball {
    pub fn zero(prec: u32) -> Self {
        Ball {
            mid: BigInt::zero(),
            rad: BigUint::zero(),
            prec,
        }
    }

    pub fn from_int(v: i64, prec: u32) -> Self {
        Ball {
            mid: BigInt::from(v) << prec,
            rad: BigUint::zero(),
            prec,
        }
    }

    pub fn from_bigint(v: &BigInt, prec: u32) -> Self {
        Ball {
            mid: v << prec,
            rad: BigUint::zero(),
            prec,
        }
    }

    pub fn from_parts(mid: BigInt, rad: BigUint, prec: u32) -> Self {
        Ball { mid, rad, prec }
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }
    pub fn mid(&self) -> &BigInt {
        &self.mid
    }
    pub fn rad(&self) -> &BigUint {
        &self.rad
    }

    pub fn add(&self, o: &Ball) -> Ball {
        debug_assert_eq!(self.prec, o.prec);
        Ball {
            mid: &self.mid + &o.mid,
            rad: &self.rad + &o.rad,
            prec: self.prec,
        }
    }

    pub fn sub(&self, o: &Ball) -> Ball {
        debug_assert_eq!(self.prec, o.prec);
        Ball {
            mid: &self.mid - &o.mid,
            rad: &self.rad + &o.rad,
            prec: self.prec,
        }
    }

    pub fn neg(&self) -> Ball {
        Ball {
            mid: -&self.mid,
            rad: self.rad.clone(),
            prec: self.prec,
        }
    }

    pub fn mul(&self, o: &Ball) -> Ball {
        debug_assert_eq!(self.prec, o.prec);
        let p = self.prec;
        let mid = shr_round(&(&self.mid * &o.mid), p);
        let (a, b) = (self.mid.magnitude(), o.mid.magnitude());
        let rad = shr_ceil(&(a * &o.rad), p) + shr_ceil(&(b * &self.rad), p) + shr_ceil(&(&self.rad * &o.rad), p) + 1u32;
        Ball { mid, rad, prec: p }
    }

    pub fn mul_int(&self, k: i64) -> Ball {
        Ball {
            mid: &self.mid * k,
            rad: &self.rad * k.unsigned_abs(),
            prec: self.prec,
        }
    }

    /// Division by a positive integer, rounded to nearest.
    pub fn div_uint(&self, d: &BigUint) -> Ball {
        let di = BigInt::from_biguint(Sign::Plus, d.clone());
        let (q, r) = self.mid.div_mod_floor(&di);
        let q = if (r << 1u32) >= di { q + 1 } else { q };
        let rad = self.rad.div_ceil(d) + 1u32;
        Ball {
            mid: q,
            rad,
            prec: self.prec,
        }
    }

    /// Midpoint as f64 (rounded).
    pub fn to_f64(&self) -> f64 {
        scaled_to_f64(&self.mid, self.prec)
    }

    pub fn rad_f64(&self) -> f64 {
        scaled_to_f64(&BigInt::from_biguint(Sign::Plus, self.rad.clone()), self.prec)
    }

    /// True when every point of the ball is ≥ 0.
    pub fn certainly_nonneg(&self) -> bool {
        self.mid.sign() != Sign::Minus || self.mid.magnitude() <= &self.rad
    }

    /// Relative radius rad/|mid| as f64; ∞ when mid = 0.
    pub fn rel_rad(&self) -> f64 {
        if self.mid.is_zero() {
            return if self.rad.is_zero() { 0.0 } else { f64::INFINITY };
        }
        ratio_f64(&self.rad, self.mid.magnitude())
    }

    /// Integer part of the midpoint (rounded to nearest).
    pub fn round_to_int(&self) -> BigInt {
        shr_round(&self.mid, self.prec)
    }
}

/// x · 2^-p as f64 without overflow in the intermediate.
pub fn scaled_to_f64(x: &BigInt, p: u32) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits() as i64;
    let shift = bits - 60;
    let top = if shift > 0 { x >> (shift as u64) } else { x.clone() };
    let t = top.to_f64().unwrap_or(0.0);
    let e = shift.max(0) - p as i64;
    t * 2f64.powi(e.clamp(-1100, 1100) as i32)
}

/// a / b for positive integers as f64, robust to huge operands.
pub fn ratio_f64(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    (ln_biguint(a) - ln_biguint(b)).exp()
}

/// a / b for positive integers, accurate to a few ulps; under- and overflow follow f64.
pub fn quotient_f64(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let s = 64 + b.bits() as i64 - a.bits() as i64;
    let q = if s >= 0 { (a << (s as u64)) / b } else { a / (b << ((-s) as u64)) };
    let e = -s;
    // split the exponent so the intermediate power of two stays finite
    let half = e / 2;
    q.to_f64().unwrap() * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
}

/// Natural log of a positive big integer from its top 60 bits.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits() as i64;
    let shift = (bits - 60).max(0);
    let top: BigUint = x >> (shift as u64);
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CBall {
    pub re: Ball,
    pub im: Ball,
}

impl CBall {
    pub fn zero(prec: u32) -> Self {
        CBall {
            re: Ball::zero(prec),
            im: Ball::zero(prec),
        }
    }

    pub fn one(prec: u32) -> Self {
        CBall {
            re: Ball::from_int(1, prec),
            im: Ball::zero(prec),
        }
    }

    pub fn add(&self, o: &CBall) -> CBall {
        CBall {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
        }
    }

    pub fn mul(&self, o: &CBall) -> CBall {
        CBall {
            re: self.re.mul(&o.re).sub(&self.im.mul(&o.im)),
            im: self.re.mul(&o.im).add(&self.im.mul(&o.re)),
        }
    }

    pub fn pow(&self, mut e: u64) -> CBall {
        let prec = self.re.prec;
        let mut base = self.clone();
        let mut acc = CBall::one(prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

/// π at precision p by Machin's formula.
pub fn pi(prec: u32) -> Ball {
    let guard = 16;
    let q = prec + guard;
    let atan_inv = |x: u64| -> BigInt {
        // Σ (−1)^k / ((2k+1) x^(2k+1)) in fixed point at 2^-q
        let x2 = BigInt::from(x * x);
        let mut power = (BigInt::one() << q) / BigInt::from(x);
        let mut acc = BigInt::zero();
        let mut k = 0u64;
        while !power.is_zero() {
            let term = &power / BigInt::from(2 * k + 1);
            if k % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
            power /= &x2;
            k += 1;
        }
        acc
    };
    let v = atan_inv(5) * 16 - atan_inv(239) * 4;
    // each truncated division loses < 1 ulp at 2^-q; a few hundred terms at most
    let mid = shr_round(&v, guard);
    Ball::from_parts(mid, BigUint::from(8u32), prec)
}

/// e^{2πi j/n} at precision p; exact for the points ±1, ±i.
pub fn root_of_unity(j: u64, n: u64, pi_ball: &Ball) -> CBall {
    let prec = pi_ball.prec;
    let j = j % n;
    if (4 * j) % n == 0 {
        let (re, im) = match 4 * j / n {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        };
        return CBall {
            re: Ball::from_int(re, prec),
            im: Ball::from_int(im, prec),
        };
    }
    // use conjugate symmetry to keep the angle in (0, π)
    let (jj, conj) = if 2 * j > n { (n - j, true) } else { (j, false) };
    let theta = pi_ball.mul_int(2 * jj as i64).div_uint(&BigUint::from(n));
    let (c, s) = cos_sin(&theta);
    CBall {
        re: c,
        im: if conj { s.neg() } else { s },
    }
}

/// cos and sin of a ball with 0 ≤ θ ≤ π by Taylor series.
fn cos_sin(theta: &Ball) -> (Ball, Ball) {
    let prec = theta.prec;
    let guard = 32;
    let q = prec + guard;
    let x = &theta.mid << guard;
    let scale = BigInt::one() << q;
    let x2 = shr_round(&(&x * &x), q);
    let mut cos = scale.clone();
    let mut sin = x.clone();
    let mut tc = scale.clone();
    let mut ts = x.clone();
    let mut k = 1u64;
    let mut steps = 0u64;
    loop {
        tc = -shr_round(&(&tc * &x2), q) / BigInt::from((2 * k - 1) * (2 * k));
        ts = -shr_round(&(&ts * &x2), q) / BigInt::from((2 * k) * (2 * k + 1));
        cos += &tc;
        sin += &ts;
        steps += 1;
        if tc.is_zero() && ts.is_zero() {
            break;
        }
        k += 1;
    }
    // rounding: ≤ 2 ulps (at 2^-q) per term; the angle's own radius maps 1:1
    let slack = BigUint::from(4 * steps + 4) >> guard;
    let rad = &theta.rad + slack + 2u32;
    (
        Ball::from_parts(shr_round(&cos, guard), rad.clone(), prec),
        Ball::from_parts(shr_round(&sin, guard), rad, prec),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_matches_double() {
        let p = pi(200);
        assert!((p.to_f64() - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn roots_have_unit_modulus() {
        let p = pi(256);
        for n in [3u64, 5, 7, 12] {
            for j in 0..n {
                let w = root_of_unity(j, n, &p);
                let m = w.re.mul(&w.re).add(&w.im.mul(&w.im));
                let one = Ball::from_int(1, 256);
                let d = m.sub(&one);
                assert!(d.mid.magnitude() <= &(d.rad.clone() + 1u32));
                let ang = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                assert!((w.re.to_f64() - ang.cos()).abs() < 1e-15);
                assert!((w.im.to_f64() - ang.sin()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn multiplication_encloses_exact_product() {
        let a = Ball::from_parts(BigInt::from(3) << 100u32, BigUint::from(5u32), 100);
        let b = Ball::from_parts(BigInt::from(-7) << 99u32, BigUint::from(2u32), 100);
        let c = a.mul(&b);
        assert!((c.to_f64() + 10.5).abs() < 1e-25);
        assert!(c.rad() >= &BigUint::from(1u32));
    }
}
