//! Jets in `k` independent nilpotent directions.
//!
//! A [`Jet`] is an element of `ℝ[ε_1, …, ε_k] / (ε_1², …, ε_k²)`, stored as
//! `2^k` coefficients indexed by the bitmask of the monomial. Evaluating a
//! smooth `f: ℝ^N → ℝ` at `x + Σ_l ε_l u_l` yields, as the coefficient of
//! `ε_1 ⋯ ε_k`, the multilinear derivative `D^k f(x)[u_1, …, u_k]`; repeated
//! directions are fine because every slot has its own infinitesimal.
//!
//! Nested first-order derivatives (operators of the form `V(∇φ · W)`) use the
//! same algebra: each level introduces a fresh slot and then extracts its
//! coefficient with [`Jet::slot_coefficient`].

use std::ops::{Add, Mul, Neg, Sub};

/// Largest number of independent slots a jet may carry.
pub const MAX_SLOTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    slots: usize,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(slots: usize, value: f64) -> Jet {
        assert!(slots <= MAX_SLOTS, "jet with {slots} slots exceeds {MAX_SLOTS}");
        let mut c = vec![0.0; 1 << slots];
        c[0] = value;
        Jet { slots, c }
    }

    pub fn zero(slots: usize) -> Jet {
        Jet::constant(slots, 0.0)
    }

    /// `value + Σ_l ε_l · direction[l]`, one slot per entry of `direction`.
    pub fn seeded(slots: usize, value: f64, direction: &[f64]) -> Jet {
        assert!(direction.len() <= slots);
        let mut j = Jet::constant(slots, value);
        for (l, v) in direction.iter().enumerate() {
            j.c[1 << l] = *v;
        }
        j
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Real part.
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    pub fn coeff_mut(&mut self, mask: usize) -> &mut f64 {
        &mut self.c[mask]
    }

    /// Coefficient of `ε_1 ⋯ ε_k`.
    pub fn top(&self) -> f64 {
        self.c[self.c.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            slots: self.slots,
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &Jet) {
        debug_assert_eq!(self.slots, other.slots);
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    pub fn add_constant(&self, v: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += v;
        out
    }

    /// `f(self)` given `derivs[p] = f^{(p)}(self.value())`. Missing higher
    /// derivatives are treated as zero, which is exact only when the nilpotent
    /// part's powers vanish beyond `derivs.len() - 1`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let mut nil = self.clone();
        nil.c[0] = 0.0;
        let mut out = Jet::constant(self.slots, derivs.first().copied().unwrap_or(0.0));
        let mut power = Jet::constant(self.slots, 1.0);
        let mut inv_fact = 1.0;
        for (p, dp) in derivs.iter().enumerate().skip(1) {
            power = &power * &nil;
            if power.c.iter().all(|x| *x == 0.0) {
                break;
            }
            inv_fact /= p as f64;
            out.add_scaled(dp * inv_fact, &power);
        }
        out
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.slots + 1])
    }

    /// `ε_slot · self` (terms already containing `ε_slot` vanish).
    pub fn times_slot(&self, slot: usize) -> Jet {
        let bit = 1usize << slot;
        let mut c = vec![0.0; self.c.len()];
        for (mask, v) in self.c.iter().enumerate() {
            if mask & bit == 0 {
                c[mask | bit] = *v;
            }
        }
        Jet { slots: self.slots, c }
    }

    /// Coefficient of `ε_slot`, as a jet in the remaining slots (entries whose
    /// mask contains `slot` are zero in the result).
    pub fn slot_coefficient(&self, slot: usize) -> Jet {
        let bit = 1usize << slot;
        let mut c = vec![0.0; self.c.len()];
        for (mask, v) in c.iter_mut().enumerate() {
            if mask & bit == 0 {
                *v = self.c[mask | bit];
            }
        }
        Jet { slots: self.slots, c }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;

    fn mul(self, rhs: &'a Jet) -> Jet {
        debug_assert_eq!(self.slots, rhs.slots);
        let len = self.c.len();
        let mut c = vec![0.0; len];
        for (t, a) in self.c.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            // supersets s of t: s = t | u with u ⊆ !t
            let free = (len - 1) & !t;
            let mut u = free;
            loop {
                c[t | u] += a * rhs.c[u];
                if u == 0 {
                    break;
                }
                u = (u - 1) & free;
            }
        }
        Jet { slots: self.slots, c }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.add_scaled(1.0, &rhs);
        self
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Lifts a point to jets with `slots` slots, perturbed along `directions[l]`
/// in slot `l`.
pub fn seed_point(x: &[f64], directions: &[&[f64]], slots: usize) -> Vec<Jet> {
    (0..x.len())
        .map(|i| {
            let dir: Vec<f64> = directions.iter().map(|u| u[i]).collect();
            Jet::seeded(slots, x[i], &dir)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_two_slots() {
        // (a + ε1 b)(c + ε2 e) = ac + ε1 bc + ε2 ae + ε1ε2 be
        let x = Jet::seeded(2, 2.0, &[3.0, 0.0]);
        let y = Jet::seeded(2, 5.0, &[0.0, 7.0]);
        let z = &x * &y;
        assert_eq!(z.c, vec![10.0, 15.0, 14.0, 21.0]);
    }

    #[test]
    fn nilpotent_squares_vanish() {
        let e = Jet::seeded(1, 0.0, &[1.0]);
        assert_eq!((&e * &e).c, vec![0.0, 0.0]);
    }

    #[test]
    fn repeated_direction_gives_second_derivative() {
        // f(x) = x^3, D^2 f(x)[1,1] = 6x
        let x = Jet::seeded(2, 1.5, &[1.0, 1.0]);
        let f = &(&x * &x) * &x;
        assert!((f.top() - 9.0).abs() < 1e-14);
        assert!((f.value() - 3.375).abs() < 1e-14);
    }

    #[test]
    fn exp_matches_taylor() {
        let x = Jet::seeded(3, 0.3, &[1.0, 1.0, 1.0]);
        let e = x.exp();
        assert!((e.top() - 0.3f64.exp()).abs() < 1e-14);
        assert!((e.coeff(0b011) - 0.3f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn slot_coefficient_extracts_directional_derivative() {
        // g(x) = x^2 at x = 3 + ε0: coefficient of ε0 is 6
        let x = Jet::seeded(1, 3.0, &[1.0]);
        let g = &x * &x;
        let d = g.slot_coefficient(0);
        assert_eq!(d.value(), 6.0);
        assert_eq!(d.coeff(1), 0.0);
    }
}
