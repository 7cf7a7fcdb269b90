//! Upward-rounded arithmetic for certified upper bounds.
//!
//! Each operation computes the round-to-nearest result, recovers the exact
//! rounding error with an error-free transformation (TwoSum, or an FMA
//! residual), and steps to the next float only when the rounded value fell
//! below the exact one. Exact operations stay exact.

/// Smallest float ≥ a + b.
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Smallest float ≥ a · b.
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Smallest float ≥ a / b, for b > 0.
pub fn div_up(a: f64, b: f64) -> f64 {
    debug_assert!(b > 0.0);
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    // a - q·b is exactly representable, so the FMA returns it exactly.
    if (-q).mul_add(b, a) > 0.0 {
        q.next_up()
    } else {
        q
    }
}

/// Largest float ≤ a − b.
pub fn sub_down(a: f64, b: f64) -> f64 {
    -add_up(-a, b)
}

/// Largest float ≤ a · b.
pub fn mul_down(a: f64, b: f64) -> f64 {
    -mul_up(-a, b)
}

/// Largest float ≤ √c, for c ≥ 0.
pub fn sqrt_down(c: f64) -> f64 {
    let s = c.sqrt();
    if s.is_finite() && s.mul_add(s, -c) > 0.0 {
        s.next_down()
    } else {
        s
    }
}

/// Largest float ≥ √c is `sqrt` itself when exact; otherwise steps up.
pub fn sqrt_up(c: f64) -> f64 {
    let s = c.sqrt();
    if s.is_finite() && s.mul_add(s, -c) < 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_operations_stay_exact() {
        assert_eq!(add_up(2.0, 6.0), 8.0);
        assert_eq!(mul_up(16.0, 3.0), 48.0);
        assert_eq!(div_up(0.5, 0.25), 2.0);
        assert_eq!(sqrt_down(0.25), 0.5);
        assert_eq!(sqrt_up(4.0), 2.0);
    }

    #[test]
    fn inexact_operations_round_outward() {
        // 0.1 + 0.2 rounds up already; 1 + 2^-60 rounds down and must step.
        let tiny = 2f64.powi(-60);
        assert!(add_up(1.0, tiny) > 1.0);
        let third = div_up(1.0, 3.0);
        assert!(third * 3.0 >= 1.0);
        assert!(mul_up(third, 3.0) >= 1.0);
        let r = sqrt_down(2.0);
        assert!(r * r <= 2.0 || r.mul_add(r, -2.0) <= 0.0);
        let r = sqrt_up(2.0);
        assert!(r.mul_add(r, -2.0) >= 0.0);
        assert!(mul_down(third, 3.0) <= 1.0);
        assert!(sub_down(1.0, tiny) < 1.0);
    }
}
