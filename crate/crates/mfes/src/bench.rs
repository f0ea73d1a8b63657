//! The classic constrained test problems `G1`-`G13` plus three engineering
//! design problems: pressure vessel (`PVD`), tension/compression spring
//! (`TCS`), and welded beam (`WBD`). Formulations follow the standard
//! constrained global-optimization test collections; `G2`, `G3`, `G8` are
//! registered as minimization, and equality constraints are registered in
//! relaxed form `|c(x)| - 1e-4 <= 0`.
//!
//! Each entry carries the literature's best-known objective value, stored
//! feasible and infeasible starting points (both inside the bound box,
//! validated by the registry tests; points that are not bound midpoints were
//! found offline by constraint solving or rejection sampling and committed
//! as data), and a published optimal solution vector that
//! [`validate_registry`] uses to cross-check the coded formulas.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::problem::{relax_equalities, EvalCounts, Evaluator, ProblemSpec, ViolationNorm};
use crate::solver;

/// Tolerance of the equality-to-inequality relaxation.
pub const EQUALITY_RELAXATION: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark problem `{0}`")]
    UnknownProblem(String),
    #[error("no stored {kind} start for `{name}`; use the midpoint start")]
    NoStoredStart { name: String, kind: &'static str },
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
}

/// Which starting point an experiment uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum StartKind {
    Feasible,
    Infeasible,
    Midpoint,
}

impl StartKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StartKind::Feasible => "feasible",
            StartKind::Infeasible => "infeasible",
            StartKind::Midpoint => "midpoint",
        }
    }
}

pub struct BenchmarkEntry {
    pub problem: ProblemSpec,
    pub f_opt: f64,
    pub feasible_start: Option<Vec<f64>>,
    pub infeasible_start: Option<Vec<f64>>,
    /// Positions in the constraint list that were equalities before
    /// relaxation.
    pub equality_indices: Vec<usize>,
    /// Published optimal solution vector, when the literature provides one.
    pub optimum: Option<Vec<f64>>,
}

impl BenchmarkEntry {
    pub fn name(&self) -> &str {
        self.problem.name()
    }

    pub fn start(&self, kind: StartKind) -> Result<Vec<f64>, BenchError> {
        match kind {
            StartKind::Midpoint => Ok(solver::default_start(&self.problem)?),
            StartKind::Feasible => {
                self.feasible_start
                    .clone()
                    .ok_or_else(|| BenchError::NoStoredStart {
                        name: self.name().to_string(),
                        kind: "feasible",
                    })
            }
            StartKind::Infeasible => {
                self.infeasible_start
                    .clone()
                    .ok_or_else(|| BenchError::NoStoredStart {
                        name: self.name().to_string(),
                        kind: "infeasible",
                    })
            }
        }
    }
}

fn ev(f: fn(&[f64]) -> f64) -> Evaluator {
    Arc::new(f)
}

/// Marks a stored start as "the bound midpoint"; resolved at build time.
const MIDPOINT: &[f64] = &[];

struct Builder {
    name: &'static str,
    objective: Evaluator,
    lower: Vec<f64>,
    upper: Vec<f64>,
    inequalities: Vec<Evaluator>,
    equalities: Vec<Evaluator>,
    f_opt: f64,
    feasible: Option<Vec<f64>>,
    infeasible: Option<Vec<f64>>,
    optimum: Option<Vec<f64>>,
}

impl Builder {
    fn build(self) -> BenchmarkEntry {
        let n = self.lower.len();
        let num_ineq = self.inequalities.len();
        let num_eq = self.equalities.len();
        let p = ProblemSpec::new(self.name, n, self.objective)
            .expect("benchmark dimension")
            .with_bounds(self.lower, self.upper)
            .expect("benchmark bounds")
            .with_constraints(self.inequalities)
            .with_constraints(relax_equalities(self.equalities, EQUALITY_RELAXATION))
            .with_best_known(self.f_opt);
        let midpoint = solver::default_start(&p).expect("benchmark boxes are finite");
        let p = p.with_start(midpoint.clone()).expect("midpoint start");
        let resolve = |s: Option<Vec<f64>>| {
            s.map(|v| if v.is_empty() { midpoint.clone() } else { v })
        };
        BenchmarkEntry {
            problem: p,
            f_opt: self.f_opt,
            feasible_start: resolve(self.feasible),
            infeasible_start: resolve(self.infeasible),
            equality_indices: (num_ineq..num_ineq + num_eq).collect(),
            optimum: self.optimum,
        }
    }
}

// ---------------------------------------------------------------------------
// G1 - G13
// ---------------------------------------------------------------------------

fn g1() -> BenchmarkEntry {
    Builder {
        name: "G1",
        objective: ev(|x| {
            5.0 * (x[0] + x[1] + x[2] + x[3])
                - 5.0 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3])
                - x[4..13].iter().sum::<f64>()
        }),
        lower: vec![0.0; 13],
        upper: [vec![1.0; 9], vec![100.0, 100.0, 100.0], vec![1.0]].concat(),
        inequalities: vec![
            ev(|x| 2.0 * x[0] + 2.0 * x[1] + x[9] + x[10] - 10.0),
            ev(|x| 2.0 * x[0] + 2.0 * x[2] + x[9] + x[11] - 10.0),
            ev(|x| 2.0 * x[1] + 2.0 * x[2] + x[10] + x[11] - 10.0),
            ev(|x| -8.0 * x[0] + x[9]),
            ev(|x| -8.0 * x[1] + x[10]),
            ev(|x| -8.0 * x[2] + x[11]),
            ev(|x| -2.0 * x[3] - x[4] + x[9]),
            ev(|x| -2.0 * x[5] - x[6] + x[10]),
            ev(|x| -2.0 * x[7] - x[8] + x[11]),
        ],
        equalities: vec![],
        f_opt: -15.0,
        feasible: Some(vec![0.0; 13]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0, 3.0, 3.0, 1.0,
        ]),
    }
    .build()
}

fn g2() -> BenchmarkEntry {
    Builder {
        name: "G2",
        objective: ev(|x| {
            let sum_cos4: f64 = x.iter().map(|v| v.cos().powi(4)).sum();
            let prod_cos2: f64 = x.iter().map(|v| v.cos().powi(2)).product();
            let den: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v * v)
                .sum::<f64>()
                .sqrt();
            -((sum_cos4 - 2.0 * prod_cos2).abs() / den)
        }),
        lower: vec![0.0; 20],
        upper: vec![10.0; 20],
        inequalities: vec![
            ev(|x| 0.75 - x.iter().product::<f64>()),
            ev(|x| x.iter().sum::<f64>() - 7.5 * x.len() as f64),
        ],
        equalities: vec![],
        f_opt: -0.803619,
        feasible: Some(MIDPOINT.to_vec()),
        infeasible: Some(vec![0.1; 20]),
        optimum: Some(vec![
            3.16246061572185,
            3.12833142812967,
            3.09479212988791,
            3.06145059523469,
            3.02792915885555,
            2.99382606701730,
            2.95866871765285,
            2.92184227312450,
            0.49482511456933,
            0.48835711005490,
            0.48231642711865,
            0.47664475092742,
            0.47129550835493,
            0.46623099264167,
            0.46142004984199,
            0.45683664767217,
            0.45245876903267,
            0.44826762241853,
            0.44424700958760,
            0.44038285956317,
        ]),
    }
    .build()
}

fn g3() -> BenchmarkEntry {
    const N: usize = 20;
    Builder {
        name: "G3",
        objective: ev(|x| {
            let n = x.len() as f64;
            -(n.sqrt().powi(x.len() as i32) * x.iter().product::<f64>())
        }),
        lower: vec![0.0; N],
        upper: vec![1.0; N],
        inequalities: vec![],
        equalities: vec![ev(|x| x.iter().map(|v| v * v).sum::<f64>() - 1.0)],
        f_opt: -1.0,
        feasible: Some([vec![0.9], vec![0.1; 19]].concat()),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![1.0 / (N as f64).sqrt(); N]),
    }
    .build()
}

fn g4_u(x: &[f64]) -> f64 {
    85.334407 + 0.0056858 * x[1] * x[4] + 0.0006262 * x[0] * x[3] - 0.0022053 * x[2] * x[4]
}

fn g4_v(x: &[f64]) -> f64 {
    80.51249 + 0.0071317 * x[1] * x[4] + 0.0029955 * x[0] * x[1] + 0.0021813 * x[2] * x[2]
}

fn g4_w(x: &[f64]) -> f64 {
    9.300961 + 0.0047026 * x[2] * x[4] + 0.0012547 * x[0] * x[2] + 0.0019085 * x[2] * x[3]
}

fn g4() -> BenchmarkEntry {
    Builder {
        name: "G4",
        objective: ev(|x| {
            5.3578547 * x[2] * x[2] + 0.8356891 * x[0] * x[4] + 37.293239 * x[0] - 40792.141
        }),
        lower: vec![78.0, 33.0, 27.0, 27.0, 27.0],
        upper: vec![102.0, 45.0, 45.0, 45.0, 45.0],
        inequalities: vec![
            ev(|x| g4_u(x) - 92.0),
            ev(|x| -g4_u(x)),
            ev(|x| g4_v(x) - 110.0),
            ev(|x| 90.0 - g4_v(x)),
            ev(|x| g4_w(x) - 25.0),
            ev(|x| 20.0 - g4_w(x)),
        ],
        equalities: vec![],
        f_opt: -30665.5,
        feasible: Some(vec![78.0, 33.0, 35.0, 45.0, 35.0]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![78.0, 33.0, 29.995256025682, 45.0, 36.775812905788]),
    }
    .build()
}

fn g5() -> BenchmarkEntry {
    Builder {
        name: "G5",
        objective: ev(|x| {
            3.0 * x[0] + 1e-6 * x[0].powi(3) + 2.0 * x[1] + (2e-6 / 3.0) * x[1].powi(3)
        }),
        lower: vec![0.0, 0.0, -0.55, -0.55],
        upper: vec![1200.0, 1200.0, 0.55, 0.55],
        inequalities: vec![ev(|x| -x[3] + x[2] - 0.55), ev(|x| -x[2] + x[3] - 0.55)],
        equalities: vec![
            ev(|x| 1000.0 * (-x[2] - 0.25).sin() + 1000.0 * (-x[3] - 0.25).sin() + 894.8 - x[0]),
            ev(|x| {
                1000.0 * (x[2] - 0.25).sin() + 1000.0 * (x[2] - x[3] - 0.25).sin() + 894.8 - x[1]
            }),
            ev(|x| 1000.0 * (x[3] - 0.25).sin() + 1000.0 * (x[3] - x[2] - 0.25).sin() + 1294.8),
        ],
        f_opt: 5126.5,
        feasible: Some(vec![
            850.14862284896776,
            850.14862284896776,
            0.0,
            -0.45416807281321731,
        ]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![
            679.94532392337703,
            1026.067128259243,
            0.11887636158921554,
            -0.39623355458153575,
        ]),
    }
    .build()
}

fn g6() -> BenchmarkEntry {
    Builder {
        name: "G6",
        objective: ev(|x| (x[0] - 10.0).powi(3) + (x[1] - 20.0).powi(3)),
        lower: vec![13.0, 0.0],
        upper: vec![100.0, 100.0],
        inequalities: vec![
            ev(|x| -(x[0] - 5.0).powi(2) - (x[1] - 5.0).powi(2) + 100.0),
            ev(|x| (x[0] - 6.0).powi(2) + (x[1] - 5.0).powi(2) - 82.81),
        ],
        equalities: vec![],
        f_opt: -6961.81,
        feasible: Some(vec![15.05, 5.0]),
        // deep inside the first disk at low x2, where the objective is below
        // its constrained optimum: reducing the violation must raise f
        infeasible: Some(vec![13.5, 0.5]),
        // the feasibility circles intersect at x1 = 14.095 exactly
        optimum: Some(vec![14.095, 5.0 - (100.0_f64 - 9.095 * 9.095).sqrt()]),
    }
    .build()
}

fn g7() -> BenchmarkEntry {
    Builder {
        name: "G7",
        objective: ev(|x| {
            x[0] * x[0] + x[1] * x[1] + x[0] * x[1] - 14.0 * x[0] - 16.0 * x[1]
                + (x[2] - 10.0).powi(2)
                + 4.0 * (x[3] - 5.0).powi(2)
                + (x[4] - 3.0).powi(2)
                + 2.0 * (x[5] - 1.0).powi(2)
                + 5.0 * x[6] * x[6]
                + 7.0 * (x[7] - 11.0).powi(2)
                + 2.0 * (x[8] - 10.0).powi(2)
                + (x[9] - 7.0).powi(2)
                + 45.0
        }),
        lower: vec![-10.0; 10],
        upper: vec![10.0; 10],
        inequalities: vec![
            ev(|x| -105.0 + 4.0 * x[0] + 5.0 * x[1] - 3.0 * x[6] + 9.0 * x[7]),
            ev(|x| 10.0 * x[0] - 8.0 * x[1] - 17.0 * x[6] + 2.0 * x[7]),
            ev(|x| -8.0 * x[0] + 2.0 * x[1] + 5.0 * x[8] - 2.0 * x[9] - 12.0),
            ev(|x| {
                3.0 * (x[0] - 2.0).powi(2) + 4.0 * (x[1] - 3.0).powi(2) + 2.0 * x[2] * x[2]
                    - 7.0 * x[3]
                    - 120.0
            }),
            ev(|x| 5.0 * x[0] * x[0] + 8.0 * x[1] + (x[2] - 6.0).powi(2) - 2.0 * x[3] - 40.0),
            ev(|x| {
                x[0] * x[0] + 2.0 * (x[1] - 2.0).powi(2) - 2.0 * x[0] * x[1] + 14.0 * x[4]
                    - 6.0 * x[5]
            }),
            ev(|x| {
                0.5 * (x[0] - 8.0).powi(2) + 2.0 * (x[1] - 4.0).powi(2) + 3.0 * x[4] * x[4]
                    - x[5]
                    - 30.0
            }),
            ev(|x| -3.0 * x[0] + 6.0 * x[1] + 12.0 * (x[8] - 8.0).powi(2) - 7.0 * x[9]),
        ],
        equalities: vec![],
        f_opt: 24.3062,
        feasible: Some(vec![
            2.0806573872588099,
            2.2028222635936303,
            8.0,
            5.0,
            0.68760784528688379,
            1.7381144266802651,
            1.5,
            9.0,
            7.9495891185358083,
            8.0201643482133065,
        ]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![
            2.1719963687365897,
            2.363682971950595,
            8.7739257227266698,
            5.0959844098793079,
            0.99065476423653764,
            1.4305739782395588,
            1.321644207727414,
            9.8287258098397672,
            8.2800914385048383,
            8.3759260932675819,
        ]),
    }
    .build()
}

fn g8() -> BenchmarkEntry {
    Builder {
        name: "G8",
        objective: ev(|x| {
            -((2.0 * PI * x[0]).sin().powi(3) * (2.0 * PI * x[1]).sin())
                / (x[0].powi(3) * (x[0] + x[1]))
        }),
        lower: vec![0.0, 0.0],
        upper: vec![10.0, 10.0],
        inequalities: vec![
            ev(|x| x[0] * x[0] - x[1] + 1.0),
            ev(|x| 1.0 - x[0] + (x[1] - 4.0).powi(2)),
        ],
        equalities: vec![],
        f_opt: -0.095825,
        feasible: Some(vec![1.4, 3.7]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![1.2279713, 4.2453733]),
    }
    .build()
}

fn g9() -> BenchmarkEntry {
    Builder {
        name: "G9",
        objective: ev(|x| {
            (x[0] - 10.0).powi(2)
                + 5.0 * (x[1] - 12.0).powi(2)
                + x[2].powi(4)
                + 3.0 * (x[3] - 11.0).powi(2)
                + 10.0 * x[4].powi(6)
                + 7.0 * x[5] * x[5]
                + x[6].powi(4)
                - 4.0 * x[5] * x[6]
                - 10.0 * x[5]
                - 8.0 * x[6]
        }),
        lower: vec![-10.0; 7],
        upper: vec![10.0; 7],
        inequalities: vec![
            ev(|x| {
                -127.0 + 2.0 * x[0] * x[0] + 3.0 * x[1].powi(4) + x[2] + 4.0 * x[3] * x[3]
                    + 5.0 * x[4]
            }),
            ev(|x| -282.0 + 7.0 * x[0] + 3.0 * x[1] + 10.0 * x[2] * x[2] + x[3] - x[4]),
            ev(|x| -196.0 + 23.0 * x[0] + x[1] * x[1] + 6.0 * x[5] * x[5] - 8.0 * x[6]),
            ev(|x| {
                4.0 * x[0] * x[0] + x[1] * x[1] - 3.0 * x[0] * x[1] + 2.0 * x[2] * x[2]
                    + 5.0 * x[5]
                    - 11.0 * x[6]
            }),
        ],
        equalities: vec![],
        f_opt: 680.63,
        feasible: Some(MIDPOINT.to_vec()),
        infeasible: Some(vec![9.0; 7]),
        optimum: Some(vec![
            2.3304990495047608,
            1.9513722931962811,
            -0.47754526052538293,
            4.3657263182141488,
            -0.62448475616043453,
            1.0381277958818274,
            1.5942255648338743,
        ]),
    }
    .build()
}

fn g10() -> BenchmarkEntry {
    Builder {
        name: "G10",
        objective: ev(|x| x[0] + x[1] + x[2]),
        lower: [vec![100.0], vec![1000.0; 2], vec![10.0; 5]].concat(),
        upper: [vec![10000.0; 3], vec![1000.0; 5]].concat(),
        inequalities: vec![
            ev(|x| -1.0 + 0.0025 * (x[3] + x[5])),
            ev(|x| -1.0 + 0.0025 * (x[4] + x[6] - x[3])),
            ev(|x| -1.0 + 0.01 * (x[7] - x[4])),
            ev(|x| -x[0] * x[5] + 833.33252 * x[3] + 100.0 * x[0] - 83333.333),
            ev(|x| -x[1] * x[6] + 1250.0 * x[4] + x[1] * x[3] - 1250.0 * x[3]),
            ev(|x| -x[2] * x[7] + 1250000.0 + x[2] * x[4] - 2500.0 * x[4]),
        ],
        equalities: vec![],
        f_opt: 7049.33,
        feasible: Some(vec![
            5000.0, 1000.0, 10000.0, 50.0, 150.0, 150.0, 200.0, 240.0,
        ]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![
            579.30318825955362,
            1359.9551392598776,
            5109.9896931310786,
            182.01740758391108,
            295.60041227475682,
            217.98259241608889,
            286.4169953091544,
            395.60041227475682,
        ]),
    }
    .build()
}

fn g11() -> BenchmarkEntry {
    Builder {
        name: "G11",
        objective: ev(|x| x[0] * x[0] + (x[1] - 1.0).powi(2)),
        lower: vec![-1.0, -1.0],
        upper: vec![1.0, 1.0],
        inequalities: vec![],
        equalities: vec![ev(|x| x[1] - x[0] * x[0])],
        f_opt: 0.75,
        feasible: Some(MIDPOINT.to_vec()), // the midpoint sits on the parabola
        infeasible: Some(vec![0.5, -0.5]),
        optimum: Some(vec![std::f64::consts::FRAC_1_SQRT_2, 0.5]),
    }
    .build()
}

fn g12() -> BenchmarkEntry {
    Builder {
        name: "G12",
        objective: ev(|x| {
            -(100.0 - (x[0] - 5.0).powi(2) - (x[1] - 5.0).powi(2) - (x[2] - 5.0).powi(2)) / 100.0
        }),
        lower: vec![0.0; 3],
        upper: vec![10.0; 3],
        inequalities: vec![ev(|x| {
            // feasible iff inside one of the 9^3 balls of radius 0.25 around
            // the integer lattice: squared distance to the nearest center
            let mut best = f64::INFINITY;
            for p in 1..=9 {
                for q in 1..=9 {
                    for r in 1..=9 {
                        let d = (x[0] - p as f64).powi(2)
                            + (x[1] - q as f64).powi(2)
                            + (x[2] - r as f64).powi(2);
                        if d < best {
                            best = d;
                        }
                    }
                }
            }
            best - 0.0625
        })],
        equalities: vec![],
        f_opt: -1.0,
        feasible: Some(MIDPOINT.to_vec()),
        infeasible: Some(vec![0.5, 0.5, 0.5]),
        optimum: Some(vec![5.0, 5.0, 5.0]),
    }
    .build()
}

fn g13() -> BenchmarkEntry {
    Builder {
        name: "G13",
        objective: ev(|x| (x[0] * x[1] * x[2] * x[3] * x[4]).exp()),
        lower: vec![-2.3, -2.3, -3.2, -3.2, -3.2],
        upper: vec![2.3, 2.3, 3.2, 3.2, 3.2],
        inequalities: vec![],
        equalities: vec![
            ev(|x| x.iter().map(|v| v * v).sum::<f64>() - 10.0),
            ev(|x| x[1] * x[2] - 5.0 * x[3] * x[4]),
            ev(|x| x[0].powi(3) + x[1].powi(3) + 1.0),
        ],
        f_opt: 0.0539498,
        feasible: Some(vec![
            -1.5,
            1.3342008243609724,
            2.1910271695996077,
            0.76462673977269258,
            0.76462673977269258,
        ]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![-1.717143, 1.595709, 1.827247, -0.7636413, -0.763645]),
    }
    .build()
}

// ---------------------------------------------------------------------------
// Engineering design problems
// ---------------------------------------------------------------------------

fn pvd() -> BenchmarkEntry {
    Builder {
        name: "PVD",
        objective: ev(|x| {
            0.6224 * x[0] * x[2] * x[3]
                + 1.7781 * x[1] * x[2] * x[2]
                + 3.1661 * x[0] * x[0] * x[3]
                + 19.84 * x[0] * x[0] * x[2]
        }),
        lower: vec![0.0625, 0.0625, 10.0, 10.0],
        upper: vec![6.1875, 6.1875, 200.0, 240.0],
        inequalities: vec![
            ev(|x| -x[0] + 0.0193 * x[2]),
            ev(|x| -x[1] + 0.00954 * x[2]),
            ev(|x| -PI * x[2] * x[2] * x[3] - (4.0 / 3.0) * PI * x[2].powi(3) + 1296000.0),
        ],
        equalities: vec![],
        f_opt: 5868.76,
        feasible: Some(MIDPOINT.to_vec()),
        infeasible: Some(vec![0.1, 0.1, 100.0, 100.0]),
        optimum: Some(vec![
            0.768325709391,
            0.379783796302,
            39.809622248187,
            207.225559518596,
        ]),
    }
    .build()
}

fn tcs() -> BenchmarkEntry {
    Builder {
        name: "TCS",
        objective: ev(|x| (x[2] + 2.0) * x[1] * x[0] * x[0]),
        lower: vec![0.05, 0.25, 2.0],
        upper: vec![2.0, 1.3, 15.0],
        inequalities: vec![
            ev(|x| 1.0 - x[1].powi(3) * x[2] / (71785.0 * x[0].powi(4))),
            ev(|x| {
                (4.0 * x[1] * x[1] - x[0] * x[1])
                    / (12566.0 * (x[1] * x[0].powi(3) - x[0].powi(4)))
                    + 1.0 / (5108.0 * x[0] * x[0])
                    - 1.0
            }),
            ev(|x| 1.0 - 140.45 * x[0] / (x[1] * x[1] * x[2])),
            ev(|x| (x[0] + x[1]) / 1.5 - 1.0),
        ],
        equalities: vec![],
        f_opt: 0.0126653,
        feasible: Some(vec![0.052, 0.36, 12.0]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![0.05169046, 0.35674963, 11.28712599]),
    }
    .build()
}

const WBD_P: f64 = 6000.0;
const WBD_L: f64 = 14.0;
const WBD_E: f64 = 30e6;
const WBD_G: f64 = 12e6;

fn wbd_shear(x: &[f64]) -> f64 {
    let tau1 = WBD_P / (std::f64::consts::SQRT_2 * x[0] * x[1]);
    let moment = WBD_P * (WBD_L + x[1] / 2.0);
    let r = (x[1] * x[1] / 4.0 + ((x[0] + x[2]) / 2.0).powi(2)).sqrt();
    let j = 2.0
        * (std::f64::consts::SQRT_2
            * x[0]
            * x[1]
            * (x[1] * x[1] / 12.0 + ((x[0] + x[2]) / 2.0).powi(2)));
    let tau2 = moment * r / j;
    (tau1 * tau1 + 2.0 * tau1 * tau2 * x[1] / (2.0 * r) + tau2 * tau2).sqrt()
}

fn wbd_buckling(x: &[f64]) -> f64 {
    (4.013 * WBD_E * (x[2] * x[2] * x[3].powi(6) / 36.0).sqrt() / (WBD_L * WBD_L))
        * (1.0 - x[2] / (2.0 * WBD_L) * (WBD_E / (4.0 * WBD_G)).sqrt())
}

fn wbd() -> BenchmarkEntry {
    Builder {
        name: "WBD",
        objective: ev(|x| 1.10471 * x[0] * x[0] * x[1] + 0.04811 * x[2] * x[3] * (14.0 + x[1])),
        lower: vec![0.125, 0.1, 0.1, 0.1],
        upper: vec![2.0, 10.0, 10.0, 2.0],
        inequalities: vec![
            ev(|x| wbd_shear(x) - 13600.0),
            ev(|x| 6.0 * WBD_P * WBD_L / (x[3] * x[2] * x[2]) - 30000.0),
            ev(|x| 0.10471 * x[0] * x[0] + 0.04811 * x[2] * x[3] * (14.0 + x[1]) - 5.0),
            ev(|x| 6.0 * WBD_P * WBD_L.powi(3) / (WBD_E * x[3] * x[2].powi(3)) - 0.25),
            ev(|x| WBD_P - wbd_buckling(x)),
        ],
        // matched weld and beam thickness
        equalities: vec![ev(|x| x[0] - x[3])],
        f_opt: 1.725,
        feasible: Some(vec![0.3, 3.0, 9.0, 0.3]),
        infeasible: Some(MIDPOINT.to_vec()),
        optimum: Some(vec![
            0.20572963978607944,
            3.4704886656280012,
            9.0366239103576351,
            0.20572963978607944,
        ]),
    }
    .build()
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// All sixteen benchmark problems in canonical order.
pub fn registry() -> Vec<BenchmarkEntry> {
    vec![
        g1(),
        g2(),
        g3(),
        g4(),
        g5(),
        g6(),
        g7(),
        g8(),
        g9(),
        g10(),
        g11(),
        g12(),
        g13(),
        pvd(),
        tcs(),
        wbd(),
    ]
}

pub fn names() -> Vec<String> {
    registry()
        .into_iter()
        .map(|e| e.name().to_string())
        .collect()
}

/// Case-insensitive lookup of a registry entry.
pub fn find(name: &str) -> Option<BenchmarkEntry> {
    registry()
        .into_iter()
        .find(|e| e.name().eq_ignore_ascii_case(name))
}

/// The literature's best-known objective value for `name`.
pub fn best_known(name: &str) -> Result<f64, BenchError> {
    find(name)
        .map(|e| e.f_opt)
        .ok_or_else(|| BenchError::UnknownProblem(name.to_string()))
}

/// Resolves a starting point for `name`.
pub fn start_point(name: &str, kind: StartKind) -> Result<Vec<f64>, BenchError> {
    let entry = find(name).ok_or_else(|| BenchError::UnknownProblem(name.to_string()))?;
    entry.start(kind)
}

// ---------------------------------------------------------------------------
// Registry validation
// ---------------------------------------------------------------------------

/// Result of evaluating one entry's coded formulas at its published optimum.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationEntry {
    pub name: String,
    pub f_opt: f64,
    pub f_at_optimum: Option<f64>,
    pub f_error: Option<f64>,
    pub violation_at_optimum: Option<f64>,
    /// False when the entry exceeds the release tolerances
    /// (`|f - f_opt| <= 1e-3 max(1, |f_opt|)` and `g <= 1e-4`).
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }

    pub fn flagged(&self) -> Vec<&ValidationEntry> {
        self.entries.iter().filter(|e| !e.ok).collect()
    }
}

/// Evaluates every entry's objective and violation at its published optimal
/// solution vector and reports the error against the best-known value.
/// Report-only; the test suite turns a flagged entry into a release blocker.
pub fn validate_registry() -> ValidationReport {
    let entries = registry()
        .into_iter()
        .map(|e| {
            let mut counts = EvalCounts::default();
            match &e.optimum {
                None => ValidationEntry {
                    name: e.name().to_string(),
                    f_opt: e.f_opt,
                    f_at_optimum: None,
                    f_error: None,
                    violation_at_optimum: None,
                    ok: true,
                },
                Some(x) => {
                    let f = e.problem.eval_objective(x, &mut counts).value();
                    let g = e.problem.eval_violation(x, ViolationNorm::L1, &mut counts);
                    let f_err = (f - e.f_opt).abs();
                    let ok = f_err <= 1e-3 * e.f_opt.abs().max(1.0)
                        && g <= 1e-4
                        && e.problem.in_unrelaxable(x);
                    ValidationEntry {
                        name: e.name().to_string(),
                        f_opt: e.f_opt,
                        f_at_optimum: Some(f),
                        f_error: Some(f_err),
                        violation_at_optimum: Some(g),
                        ok,
                    }
                }
            }
        })
        .collect();
    ValidationReport { entries }
}

// ---------------------------------------------------------------------------
// Manifest and built-in catalogs for declarative problem files
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub dimension: usize,
    pub constraints: usize,
    pub equality_indices: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub f_opt: f64,
    pub feasible_start: Option<Vec<f64>>,
    pub infeasible_start: Option<Vec<f64>>,
    pub midpoint_start: Option<Vec<f64>>,
}

/// Structured dump of the registry (name, sizes, bounds, best-known value,
/// start points).
pub fn manifest() -> Vec<ManifestEntry> {
    registry()
        .into_iter()
        .map(|e| ManifestEntry {
            name: e.name().to_string(),
            dimension: e.problem.dimension(),
            constraints: e.problem.num_relaxable(),
            equality_indices: e.equality_indices.clone(),
            lower: e.problem.lower().to_vec(),
            upper: e.problem.upper().to_vec(),
            f_opt: e.f_opt,
            feasible_start: e.feasible_start.clone(),
            infeasible_start: e.infeasible_start.clone(),
            midpoint_start: solver::default_start(&e.problem).ok(),
        })
        .collect()
}

/// Objectives addressable by name from declarative problem files: `sphere`
/// plus every registry objective under its problem name.
pub fn builtin_objective(name: &str) -> Option<Evaluator> {
    if name.eq_ignore_ascii_case("sphere") {
        return Some(ev(|x| x.iter().map(|v| v * v).sum()));
    }
    find(name).map(|e| {
        let p = e.problem;
        let wrapped: Evaluator = Arc::new(move |x: &[f64]| {
            let mut c = EvalCounts::default();
            p.eval_objective(x, &mut c).value()
        });
        wrapped
    })
}

/// Constraint sets addressable by name from declarative problem files:
/// `none`, `unit-lower-bound` (the single constraint `1 - x_1 <= 0`), and
/// every registry set under its problem name (equalities already relaxed).
pub fn builtin_constraint_set(name: &str) -> Option<Vec<Evaluator>> {
    if name.eq_ignore_ascii_case("none") {
        return Some(Vec::new());
    }
    if name.eq_ignore_ascii_case("unit-lower-bound") {
        return Some(vec![ev(|x| 1.0 - x[0])]);
    }
    find(name).map(|e| e.problem.relaxable_constraints().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::EvalCounts;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    // Table of (name, n, m) the registry must match exactly.
    const EXPECTED: [(&str, usize, usize); 16] = [
        ("G1", 13, 9),
        ("G2", 20, 2),
        ("G3", 20, 1),
        ("G4", 5, 6),
        ("G5", 4, 5),
        ("G6", 2, 2),
        ("G7", 10, 8),
        ("G8", 2, 2),
        ("G9", 7, 4),
        ("G10", 8, 6),
        ("G11", 2, 1),
        ("G12", 3, 1),
        ("G13", 5, 3),
        ("PVD", 4, 3),
        ("TCS", 3, 4),
        ("WBD", 4, 6),
    ];

    #[test]
    fn dimensions_and_constraint_counts() {
        let reg = registry();
        assert_eq!(reg.len(), 16);
        for ((name, n, m), entry) in EXPECTED.iter().zip(&reg) {
            assert_eq!(entry.name(), *name);
            assert_eq!(entry.problem.dimension(), *n, "{name} dimension");
            assert_eq!(entry.problem.num_relaxable(), *m, "{name} constraints");
        }
    }

    #[test]
    fn equality_problems() {
        for e in registry() {
            let has_eq = !e.equality_indices.is_empty();
            let expect = matches!(e.name(), "G3" | "G5" | "G11" | "G13" | "WBD");
            assert_eq!(has_eq, expect, "{}", e.name());
        }
    }

    #[test]
    fn best_known_values() {
        let expected = [
            ("G1", -15.0),
            ("G2", -0.803619),
            ("G3", -1.0),
            ("G4", -30665.5),
            ("G5", 5126.5),
            ("G6", -6961.81),
            ("G7", 24.3062),
            ("G8", -0.095825),
            ("G9", 680.63),
            ("G10", 7049.33),
            ("G11", 0.75),
            ("G12", -1.0),
            ("G13", 0.0539498),
            ("PVD", 5868.76),
            ("TCS", 0.0126653),
            ("WBD", 1.725),
        ];
        for (name, f) in expected {
            assert_eq!(best_known(name).unwrap(), f, "{name}");
        }
        assert!(best_known("nope").is_err());
    }

    #[test]
    fn stored_starts_are_valid() {
        let tol = 1e-5;
        for e in registry() {
            let mut c = EvalCounts::default();
            if let Some(x) = &e.feasible_start {
                assert!(e.problem.in_unrelaxable(x), "{} feasible start in box", e.name());
                let g = e.problem.eval_violation(x, ViolationNorm::L1, &mut c);
                assert!(g < tol, "{} feasible start has g = {g}", e.name());
            }
            if let Some(x) = &e.infeasible_start {
                assert!(e.problem.in_unrelaxable(x), "{} infeasible start in box", e.name());
                let g = e.problem.eval_violation(x, ViolationNorm::L1, &mut c);
                assert!(g >= tol, "{} infeasible start has g = {g}", e.name());
            }
        }
    }

    #[test]
    fn registry_validation_is_clean() {
        let report = validate_registry();
        for e in &report.entries {
            assert!(
                e.ok,
                "{}: f_err={:?} g={:?}",
                e.name, e.f_error, e.violation_at_optimum
            );
        }
    }

    #[test]
    fn midpoint_start_rule() {
        let mid = start_point("G12", StartKind::Midpoint).unwrap();
        assert_eq!(mid, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn evaluators_total_and_finite_on_box() {
        // randomized sampling over each bound box; singular corners (e.g.
        // G8 at x1 = 0) have measure zero and never come up
        let mut rng = StdRng::seed_from_u64(99);
        for e in registry() {
            let p = &e.problem;
            let mut c = EvalCounts::default();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..p.dimension())
                    .map(|j| rng.random_range(p.lower()[j]..=p.upper()[j]))
                    .collect();
                let f = p.eval_objective(&x, &mut c);
                assert!(f.is_finite(), "{} objective not finite at {x:?}", e.name());
                let g = p.eval_violation(&x, ViolationNorm::L1, &mut c);
                assert!(g.is_finite() && g >= 0.0, "{} violation at {x:?}", e.name());
            }
            assert_eq!(c.eval_errors, 0, "{}", e.name());
        }
    }

    #[test]
    fn builtin_catalogs() {
        let sphere = builtin_objective("sphere").unwrap();
        assert_eq!(sphere(&[3.0, 4.0]), 25.0);
        assert!(builtin_objective("g8").is_some());
        assert!(builtin_objective("missing").is_none());

        let cs = builtin_constraint_set("unit-lower-bound").unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0](&[0.25]), 0.75);
        assert_eq!(builtin_constraint_set("g6").unwrap().len(), 2);
        assert_eq!(builtin_constraint_set("none").unwrap().len(), 0);
    }
}
