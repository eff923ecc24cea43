//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use gamma_core::abstractmodel::{example1_counterexample, model_pipeline, EmbeddingMode};
use gamma_core::dilation::{extract_w, necessary1_check, representation_split, schaffer_dilate, verify_dilation};
use gamma_core::gammaops::{
    fo_tuple, gen_diagonal, gen_diagonal_normal, gen_symmetrized_ando, random_conjugate, verify_fundamental_identity,
    GammaTuple, PointLaw, VnConfig,
};
use gamma_core::hardy::{blh_intertwine, MatrixPolynomial};
use gamma_core::invariants::{
    char_fn, char_tuple, coincidence_grid, coincidence_solve, decide_equivalence, CoincidenceConfig, Equivalence,
};
use gamma_core::matcore::{cx, gaussian_matrix, haar_unitary, op_norm, seeded_rng};
use gamma_core::{Mat, Tolerances, Tuple};
use nalgebra::{Complex, DVector};
use serde_json::{json, Value};

struct Outcome {
    passed: bool,
    detail: String,
    report: Value,
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// 50 tuples alternating the symmetrized Ando and diagonal normal generators.
fn corpus() -> Vec<Tuple> {
    (0..50u64)
        .map(|k| {
            let dim = 2 + (k as usize % 7);
            let n = 3 + (k as usize / 7) % 3;
            if k % 2 == 0 {
                gen_symmetrized_ando(dim, n, 1000 + k).expect("generator")
            } else {
                gen_diagonal_normal(dim, n, 2000 + k).expect("generator")
            }
        })
        .collect()
}

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn criterion1(corpus: &[Tuple]) -> Outcome {
    let t0 = Instant::now();
    let tol = tol();
    let mut worst_scaled = 0.0f64;
    let mut worst_identity = 0.0f64;
    for g in corpus {
        let f = fo_tuple(g, &tol).expect("fo tuple");
        for i in 1..g.n() {
            worst_scaled = worst_scaled.max(f.residuals[i - 1] / (1.0 + op_norm(g.s(i))));
        }
        worst_identity = worst_identity.max(verify_fundamental_identity(g, &f, &tol).expect("identity").max);
    }
    let secs = t0.elapsed().as_secs_f64();
    Outcome {
        passed: worst_scaled <= 1e-8 && worst_identity <= 1e-8 && secs < 30.0,
        detail: format!("scaled residual {worst_scaled:.2e}, identity {worst_identity:.2e}, {secs:.1}s"),
        report: json!({ "scaled": worst_scaled, "identity": worst_identity }),
    }
}

fn criteria2to4(corpus: &[Tuple]) -> [Outcome; 3] {
    let tol = tol();
    let (mut comp, mut alg, mut rec, mut rep) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut failed = 0usize;
    for g in corpus {
        let f = fo_tuple(g, &tol).expect("fo tuple");
        let d = schaffer_dilate(g, &f, 12, &tol).expect("dilation");
        let c = verify_dilation(&d, 5, &tol);
        if c.degree_used != 5 {
            failed += 1;
        }
        comp = comp.max(c.max_residual);
        alg = alg.max(c.algebra);
        rec = rec.max(extract_w(&d, &f, &tol).expect("extract").recovery_residual);
        rep = rep.max(representation_split(&d, 0.5, &tol).expect("split").max_residual);
    }
    [
        Outcome {
            passed: failed == 0 && comp <= 1e-6 && alg <= 1e-8,
            detail: format!("compression {comp:.2e}, interior algebra {alg:.2e}"),
            report: json!({ "compression": comp, "algebra": alg }),
        },
        Outcome {
            passed: rec <= 1e-8,
            detail: format!("recovery residual {rec:.2e}"),
            report: json!({ "recovery": rec }),
        },
        Outcome {
            passed: rep <= 1e-6,
            detail: format!("representation residual {rep:.2e}"),
            report: json!({ "representation": rep }),
        },
    ]
}

fn criterion5() -> Outcome {
    let r = example1_counterexample::<f64>(12, 3, 0.5, &tol()).expect("example");
    let formulas = r.max_formula_residual();
    let gap_err = (r.gap - 0.75).abs();
    Outcome {
        passed: gap_err <= 1e-6 && r.checked_coordinates >= 8 && formulas <= 1e-10 && r.model.max_w1 <= 1e-8,
        detail: format!(
            "gap {:.12}, formulas {formulas:.2e} on {} coordinates, W1 side {:.2e}",
            r.gap, r.checked_coordinates, r.model.max_w1
        ),
        report: serde_json::to_value(&r).expect("serialize"),
    }
}

fn criterion6() -> Outcome {
    let tol = tol();
    let (mut model, mut kcomm) = (0.0f64, 0.0f64);
    let mut reports = Vec::new();
    for k in 0..20u64 {
        let dim = 2 + (k as usize % 5);
        let n = 3 + (k as usize % 3);
        let g = if k % 2 == 0 {
            gen_diagonal_normal(dim, n, 3000 + k)
        } else {
            gen_diagonal(dim, n, 3000 + k, PointLaw::Interior)
        }
        .expect("generator");
        let out = model_pipeline(&g, 40, 40, EmbeddingMode::Strict, &tol).expect("model");
        model = model.max(out.model.max_w1).max(out.model.max_w2);
        kcomm = kcomm.max(out.asymptotic.residuals.q_commutation);
        reports.push(serde_json::to_value(&out.model).expect("serialize"));
    }
    Outcome {
        passed: model <= 1e-6 && kcomm <= 1e-7,
        detail: format!("model residual {model:.2e}, Q/V commutation {kcomm:.2e}"),
        report: Value::Array(reports),
    }
}

fn scale_p(g: &Tuple, c: f64) -> Tuple {
    GammaTuple::new(g.s_all().to_vec(), g.p() * cx::<f64>(c, 0.0)).expect("same shapes")
}

fn criterion7() -> Outcome {
    let tol = tol();
    let cfg = CoincidenceConfig::default();
    let mut conf = 0.0f64;
    let (mut certified, mut rejected, mut false_certs) = (0usize, 0usize, 0usize);
    let mut reports = Vec::new();
    for k in 0..20u64 {
        let g = gen_diagonal_normal(2 + (k as usize % 4), 3 + (k as usize % 2), 4000 + k).expect("generator");
        let (h, _) = random_conjugate(&g, 5000 + k);
        let r = decide_equivalence(&g, &h, cfg, &tol).expect("decide");
        if r.verdict == Equivalence::Equivalent {
            certified += 1;
            conf = conf.max(r.confirmation.as_ref().map_or(f64::INFINITY, |c| c.residual));
        }
        reports.push(serde_json::to_value(&r.coincidence).expect("serialize"));
    }
    let grid = coincidence_grid::<f64>();
    let forced = CoincidenceConfig {
        force_alignment: true,
        ..cfg
    };
    for k in 0..20u64 {
        let g = gen_diagonal_normal(2 + (k as usize % 4), 3 + (k as usize % 2), 6000 + k).expect("generator");
        let certified_wrongly = if k % 2 == 0 {
            let r = decide_equivalence(&g, &scale_p(&g, 0.9), cfg, &tol).expect("decide");
            r.verdict == Equivalence::Equivalent
        } else {
            let f = fo_tuple(&g, &tol).expect("fo");
            let fadj = fo_tuple(&g.adjoint(), &tol).expect("fo");
            let ct = char_tuple(&g, &f, &fadj, &grid, &tol).expect("char tuple");
            let mut ct2 = ct.clone();
            let kd = ct2.f.k();
            ct2.f.a[0] += Mat::identity(kd, kd) * cx::<f64>(0.3, 0.0);
            coincidence_solve(&ct, &ct2, &fadj, &fadj, forced, &tol)
                .expect("solve")
                .is_certified()
        };
        if certified_wrongly {
            false_certs += 1;
        } else {
            rejected += 1;
        }
    }
    Outcome {
        passed: certified == 20 && conf <= 1e-6 && rejected == 20 && false_certs == 0,
        detail: format!(
            "{certified}/20 certified (confirmation {conf:.2e}), {rejected}/20 perturbed rejected, {false_certs} false certificates"
        ),
        report: Value::Array(reports),
    }
}

fn grid64() -> Vec<Complex<f64>> {
    let mut pts = vec![Complex::new(0.0, 0.0)];
    for (r, count) in [(0.5, 31usize), (0.95, 32)] {
        for j in 0..count {
            let t = std::f64::consts::TAU * j as f64 / count as f64;
            pts.push(Complex::from_polar(r, t));
        }
    }
    pts
}

fn criterion8(corpus: &[Tuple]) -> Outcome {
    let tol = tol();
    let pts = grid64();
    let (mut excess, mut origin) = (0.0f64, 0.0f64);
    for g in corpus {
        let th = char_fn(g.p(), &pts, 8, &tol).expect("char fn");
        excess = excess.max(th.max_norm() - 1.0);
        origin = origin.max(th.origin_residual(g.p()).unwrap_or(f64::INFINITY));
    }
    Outcome {
        passed: pts.len() == 64 && excess <= 1e-8 && origin <= 1e-8,
        detail: format!("max ‖Θ‖ − 1 = {excess:.2e}, origin residual {origin:.2e}"),
        report: json!({ "excess": excess, "origin": origin }),
    }
}

fn diag2(a: Complex<f64>, b: Complex<f64>) -> Mat {
    Mat::from_diagonal(&DVector::from_vec(vec![a, b]))
}

fn criterion9(corpus: &[Tuple]) -> Outcome {
    let tol = tol();
    let cfg = VnConfig {
        samples: 30,
        ..VnConfig::default()
    };
    let mut n1_fail = 0usize;
    for g in corpus {
        let fadj = fo_tuple(&g.adjoint(), &tol).expect("fo");
        if !necessary1_check(&fadj, 4, 16, cfg, &tol).expect("check").passed {
            n1_fail += 1;
        }
    }
    let mut rng = seeded_rng(77);
    let a2: Vec<Mat> = (0..2).map(|_| gaussian_matrix(2, 2, &mut rng)).collect();
    let a3: Vec<Mat> = (0..3).map(|_| gaussian_matrix(3, 3, &mut rng)).collect();
    let w: Mat = haar_unitary(3, &mut rng);
    let (o, one, i) = (cx(0.0, 0.0), cx(1.0, 0.0), cx(0.0, 1.0));
    let families: Vec<(MatrixPolynomial<f64>, Vec<Mat>)> = vec![
        (MatrixPolynomial::new(vec![Mat::zeros(2, 2), Mat::identity(2, 2)]).expect("poly"), a2),
        (MatrixPolynomial::new(vec![w]).expect("poly"), a3),
        (
            MatrixPolynomial::new(vec![diag2(o, i) * cx(0.0, -1.0), diag2(one, o)]).expect("poly"),
            vec![diag2(cx(0.3, 0.0), cx(0.0, 0.2)), diag2(cx(-0.1, 0.0), cx(0.0, 0.4))],
        ),
    ];
    let (mut round, mut drift) = (0.0f64, 0.0f64);
    for (theta, a) in &families {
        let d = 2 * (1 + theta.degree()).max(2);
        let r1 = blh_intertwine(theta, a, d, &tol).expect("blh");
        let r2 = blh_intertwine(theta, a, 2 * d, &tol).expect("blh");
        round = round.max(r1.residual).max(r2.residual);
        drift = drift.max(max(r1.b.iter().zip(&r2.b).map(|(x, y)| op_norm(&(x - y)))));
    }
    Outcome {
        passed: n1_fail == 0 && round <= 1e-8 && drift <= 1e-10,
        detail: format!("necessary condition failed on {n1_fail}/50, BLH residual {round:.2e}, depth drift {drift:.2e}"),
        report: json!({ "failures": n1_fail, "round": round, "drift": drift }),
    }
}

fn run_all(corpus: &[Tuple]) -> Vec<Outcome> {
    let mut out = vec![criterion1(corpus)];
    out.extend(criteria2to4(corpus));
    out.push(criterion5());
    out.push(criterion6());
    out.push(criterion7());
    out.push(criterion8(corpus));
    out.push(criterion9(corpus));
    out
}

fn main() -> ExitCode {
    let corpus = corpus();
    let first = run_all(&corpus);
    let again = run_all(&corpus);
    let bytes = |o: &[Outcome]| -> Vec<String> {
        o.iter().map(|x| serde_json::to_string(&x.report).expect("serialize")).collect()
    };
    let (b1, b2) = (bytes(&first), bytes(&again));
    let same = b1.iter().zip(&b2).filter(|(x, y)| x == y).count();
    let tenth = Outcome {
        passed: same == b1.len(),
        detail: format!("{same}/{} reports byte-identical on rerun", b1.len()),
        report: Value::Null,
    };
    let mut all_ok = true;
    for (k, o) in first.iter().chain(std::iter::once(&tenth)).enumerate() {
        all_ok &= o.passed;
        println!("criterion {:>2}: {} ({})", k + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
