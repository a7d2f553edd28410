use serde::{Deserialize, Serialize};

/// `G(x) = exp(κ + h x - λ x² / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPotential {
    pub log_scale: f64,
    pub linear: f64,
    pub precision: f64,
}

impl GaussianPotential {
    pub const ONE: Self = Self { log_scale: 0.0, linear: 0.0, precision: 0.0 };

    /// `x ↦ N(y; x, r)`.
    pub fn observation(y: f64, variance: f64) -> Self {
        Self {
            log_scale: -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - y * y / (2.0 * variance),
            linear: y / variance,
            precision: 1.0 / variance,
        }
    }

    /// `x ↦ N(y; a x, s)`.
    pub fn scaled_observation(y: f64, coefficient: f64, variance: f64) -> Self {
        Self {
            log_scale: -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - y * y / (2.0 * variance),
            linear: coefficient * y / variance,
            precision: coefficient * coefficient / variance,
        }
    }

    pub fn ln_eval(&self, x: f64) -> f64 {
        self.log_scale + self.linear * x - 0.5 * self.precision * x * x
    }
}

/// `f(x) = exp(κ + h x - λ x² / 2) (α + β x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianLinear {
    pub log_scale: f64,
    pub linear: f64,
    pub precision: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// A value `exp(log) · factor`, kept split to survive under- and overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Scaled {
    pub log: f64,
    pub factor: f64,
}

impl Scaled {
    pub fn value(self) -> f64 {
        self.log.exp() * self.factor
    }

    /// `self / other`.
    pub fn ratio(self, other: Scaled) -> f64 {
        (self.log - other.log).exp() * self.factor / other.factor
    }
}

/// `∫ N(x; m, v) exp(κ + h x - λ x²/2) (c₀ + c₁ x + c₂ x²) dx`.
pub(crate) fn integrate_quadratic(mean: f64, variance: f64, exponent: (f64, f64, f64), poly: [f64; 3]) -> Scaled {
    let (kappa, h, lambda) = exponent;
    let precision = 1.0 / variance + lambda;
    let s = 1.0 / precision;
    let m = (mean / variance + h) * s;
    let log = kappa - 0.5 * (variance * precision).ln() + 0.5 * precision * m * m - 0.5 * mean * mean / variance;
    let factor = poly[0] + poly[1] * m + poly[2] * (s + m * m);
    Scaled { log, factor }
}

impl GaussianLinear {
    pub fn constant(c: f64) -> Self {
        Self { log_scale: 0.0, linear: 0.0, precision: 0.0, alpha: c, beta: 0.0 }
    }

    /// `x ↦ α + β x`.
    pub fn affine(alpha: f64, beta: f64) -> Self {
        Self { log_scale: 0.0, linear: 0.0, precision: 0.0, alpha, beta }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.log_scale + self.linear * x - 0.5 * self.precision * x * x).exp() * (self.alpha + self.beta * x)
    }

    /// `G · f`.
    pub fn times(self, g: GaussianPotential) -> Self {
        Self {
            log_scale: self.log_scale + g.log_scale,
            linear: self.linear + g.linear,
            precision: self.precision + g.precision,
            ..self
        }
    }

    /// `x ↦ ∫ N(x'; a x + b, q) f(x') dx'`.
    pub fn transition_integral(self, a: f64, b: f64, q: f64) -> Self {
        let Self { log_scale: kappa, linear: h, precision: lambda, alpha, beta } = self;
        let p = 1.0 / q + lambda;
        let qp = q * p;
        // As a function of the transition mean m.
        let lambda_m = lambda / qp;
        let h_m = h / qp;
        let kappa_m = kappa + h * h / (2.0 * p) - 0.5 * qp.ln();
        let alpha_m = alpha + beta * h / p;
        let beta_m = beta / qp;
        // Substitute m = a x + b.
        Self {
            log_scale: kappa_m + h_m * b - 0.5 * lambda_m * b * b,
            linear: a * h_m - lambda_m * a * b,
            precision: lambda_m * a * a,
            alpha: alpha_m + beta_m * b,
            beta: beta_m * a,
        }
        .renormalized()
    }

    /// Moves the magnitude of `(α, β)` into `κ`.
    fn renormalized(self) -> Self {
        let s = self.alpha.abs().max(self.beta.abs());
        if s == 0.0 || !s.is_finite() {
            return self;
        }
        Self { log_scale: self.log_scale + s.ln(), alpha: self.alpha / s, beta: self.beta / s, ..self }
    }

    /// `∫ N(x; m, v) f(x) g(x) dx`.
    pub(crate) fn integrate_product(&self, other: &Self, mean: f64, variance: f64) -> Scaled {
        integrate_quadratic(
            mean,
            variance,
            (self.log_scale + other.log_scale, self.linear + other.linear, self.precision + other.precision),
            [self.alpha * other.alpha, self.alpha * other.beta + self.beta * other.alpha, self.beta * other.beta],
        )
    }

    /// `∫ N(x; m, v) f(x) dx`.
    pub(crate) fn integrate(&self, mean: f64, variance: f64) -> Scaled {
        integrate_quadratic(mean, variance, (self.log_scale, self.linear, self.precision), [self.alpha, self.beta, 0.0])
    }

    /// `(ln c, a, s)` with `exp(κ + h x - λx²/2) = c · exp(-(x - a)²/(2s))`, when `λ > 0`.
    pub fn gaussian_form(&self) -> Option<(f64, f64, f64)> {
        (self.precision > 0.0).then(|| {
            let s = 1.0 / self.precision;
            let a = self.linear * s;
            (self.log_scale + 0.5 * self.linear * a, a, s)
        })
    }
}
