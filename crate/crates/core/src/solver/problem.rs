use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::ProblemError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl RowSense {
    fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    pub integer: bool,
    /// Branching class; fractional columns of a higher class are branched
    /// on first.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub priority: u8,
}

fn is_zero(v: &u8) -> bool {
    *v == 0
}

/// Sparse linear row `Σ coef·x[col] (sense) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub name: String,
    pub terms: Vec<(usize, T)>,
    pub sense: RowSense,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, &(j, a)| acc + a * x[j])
    }

    /// Amount by which `x` violates the row; zero when satisfied.
    pub fn violation(&self, x: &[T]) -> T {
        let lhs = self.activity(x);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(T::zero()),
            RowSense::Ge => (self.rhs - lhs).max(T::zero()),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Largest absolute coefficient, used to normalize residuals.
    pub fn scale(&self) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |m, &(_, a)| m.max(a.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective<T> {
    pub sense: ObjectiveSense,
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

/// A mixed-binary linear program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem<T> {
    pub variables: Vec<Variable<T>>,
    pub constraints: Vec<Constraint<T>>,
    pub objective: Objective<T>,
}

impl<T: Scalar> Default for MilpProblem<T> {
    fn default() -> Self {
        Self::new(ObjectiveSense::Maximize)
    }
}

impl<T: Scalar> MilpProblem<T> {
    pub fn new(sense: ObjectiveSense) -> Self {
        Self {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective {
                sense,
                terms: Vec::new(),
                constant: T::zero(),
            },
        }
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: T, upper: T) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer: false,
            priority: 0,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower: T::zero(),
            upper: T::one(),
            integer: true,
            priority: 0,
        });
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, T)>,
        sense: RowSense,
        rhs: T,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, sense: ObjectiveSense, terms: Vec<(usize, T)>, constant: T) {
        self.objective = Objective {
            sense,
            terms,
            constant,
        };
    }

    pub fn binary_columns(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter_map(|(j, v)| v.integer.then_some(j))
            .collect()
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective
            .terms
            .iter()
            .fold(self.objective.constant, |acc, &(j, c)| acc + c * x[j])
    }

    /// Largest row violation after dividing each residual by the row's
    /// largest coefficient.
    pub fn max_normalized_violation(&self, x: &[T]) -> T {
        self.constraints
            .iter()
            .map(|c| {
                let s = c.scale();
                if s > T::zero() {
                    c.violation(x) / s
                } else {
                    c.violation(x)
                }
            })
            .fold(T::zero(), T::max)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.n_vars();
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ProblemError::BadBounds {
                    column: j,
                    lower: v.lower.as_f64(),
                    upper: v.upper.as_f64(),
                });
            }
            if v.integer && (v.lower < T::zero() || v.upper > T::one()) {
                return Err(ProblemError::NonBinaryInteger { column: j });
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            for &(j, a) in &c.terms {
                if j >= n {
                    return Err(ProblemError::ColumnOutOfRange { row: Some(i), column: j });
                }
                if !a.is_finite() {
                    return Err(ProblemError::NonFinite { row: Some(i), column: j });
                }
            }
            if !c.rhs.is_finite() {
                return Err(ProblemError::NonFinite { row: Some(i), column: usize::MAX });
            }
        }
        for &(j, c) in &self.objective.terms {
            if j >= n {
                return Err(ProblemError::ColumnOutOfRange { row: None, column: j });
            }
            if !c.is_finite() {
                return Err(ProblemError::NonFinite { row: None, column: j });
            }
        }
        Ok(())
    }

    /// Writes the model in CPLEX LP text format.
    pub fn write_lp_format<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        let name = |j: usize| self.variables[j].name.as_str();
        let expr = |terms: &[(usize, T)]| {
            let mut s = String::new();
            for (k, &(j, a)) in terms.iter().enumerate() {
                let a = a.as_f64();
                if k == 0 {
                    let _ = write!(s, "{} {}", fmt_num(a), name(j));
                } else if a < 0.0 {
                    let _ = write!(s, " - {} {}", fmt_num(-a), name(j));
                } else {
                    let _ = write!(s, " + {} {}", fmt_num(a), name(j));
                }
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };

        writeln!(out, "\\ {} variables, {} constraints", self.n_vars(), self.constraints.len())?;
        let c0 = self.objective.constant.as_f64();
        if c0 != 0.0 {
            writeln!(out, "\\ objective constant {}", fmt_num(c0))?;
        }
        match self.objective.sense {
            ObjectiveSense::Maximize => writeln!(out, "Maximize")?,
            ObjectiveSense::Minimize => writeln!(out, "Minimize")?,
        }
        writeln!(out, " obj: {}", expr(&self.objective.terms))?;
        writeln!(out, "Subject To")?;
        for c in &self.constraints {
            writeln!(
                out,
                " {}: {} {} {}",
                c.name,
                expr(&c.terms),
                c.sense.symbol(),
                fmt_num(c.rhs.as_f64())
            )?;
        }
        writeln!(out, "Bounds")?;
        for v in self.variables.iter().filter(|v| !v.integer) {
            let (lo, hi) = (v.lower.as_f64(), v.upper.as_f64());
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => writeln!(out, " {} <= {} <= {}", fmt_num(lo), v.name, fmt_num(hi))?,
                (true, false) => writeln!(out, " {} >= {}", v.name, fmt_num(lo))?,
                (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, fmt_num(hi))?,
                (false, false) => writeln!(out, " {} free", v.name)?,
            }
        }
        let bins: Vec<&str> = self
            .variables
            .iter()
            .filter(|v| v.integer)
            .map(|v| v.name.as_str())
            .collect();
        if !bins.is_empty() {
            writeln!(out, "Binaries")?;
            for chunk in bins.chunks(8) {
                writeln!(out, " {}", chunk.join(" "))?;
            }
        }
        writeln!(out, "End")
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_dump_is_readable() {
        let mut p = MilpProblem::<f64>::new(ObjectiveSense::Maximize);
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        let c = p.add_continuous("c", 0.0, f64::INFINITY);
        p.add_constraint("cap", vec![(a, 1.0), (b, 1.0)], RowSense::Le, 1.0);
        p.add_constraint("link", vec![(c, 1.0), (a, -2.5)], RowSense::Le, 0.0);
        p.set_objective(ObjectiveSense::Maximize, vec![(a, 3.0), (b, 2.0), (c, 0.5)], 0.0);
        let mut buf = Vec::new();
        p.write_lp_format(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(" obj: 3 a + 2 b + 0.5 c"));
        assert!(text.contains(" cap: 1 a + 1 b <= 1"));
        assert!(text.contains(" link: 1 c - 2.5 a <= 0"));
        assert!(text.contains(" c >= 0"));
        assert!(text.contains("Binaries\n a b\nEnd"));
    }

    #[test]
    fn validate_catches_bad_columns() {
        let mut p = MilpProblem::<f64>::default();
        let a = p.add_continuous("a", 0.0, 1.0);
        p.add_constraint("r", vec![(a + 1, 1.0)], RowSense::Le, 1.0);
        assert!(matches!(
            p.validate(),
            Err(ProblemError::ColumnOutOfRange { row: Some(0), column: 1 })
        ));
        let mut q = MilpProblem::<f64>::default();
        q.add_continuous("a", 2.0, 1.0);
        assert!(matches!(q.validate(), Err(ProblemError::BadBounds { .. })));
    }
}
