//! Acceptance battery: one test per release criterion, each printing a
//! single pass/fail line. Tolerances and sample counts are pinned here;
//! the drivers live in `lps_core::suites`.

use std::time::Instant;

use lps_core::suites::{
    axioms_suite, bg_suite, closed_form_suite, equivalence_suite, gamma_suite, growth_suite,
    kernel_suite, nc_suite, sandwich_suite, AxiomsConfig, BgConfig, ClosedFormConfig,
    EquivalenceConfig, GammaConfig, GrowthConfig, KernelConfig, NcConfig, SandwichConfig,
    SuiteReport,
};

fn verdict(name: &str, limit_s: f64, started: Instant, rep: &SuiteReport) {
    let elapsed = started.elapsed().as_secs_f64();
    let word = if rep.pass() { "PASS" } else { "FAIL" };
    println!("{name}: {word} ({elapsed:.1}s)");
    if let Some(f) = rep.first_failure() {
        println!("  '{}' worst {} exceeds tolerance {}", f.label, f.worst, f.tolerance);
    }
    assert!(rep.pass(), "{name} failed: {:?}", rep.first_failure());
    assert!(
        elapsed < limit_s,
        "{name} took {elapsed:.1}s, limit {limit_s}s"
    );
}

#[test]
fn criterion_01_pointwise_sandwich_and_lp() {
    let started = Instant::now();
    let rep = sandwich_suite(&SandwichConfig {
        seed: 7,
        depth: 8,
        samples: 1000,
        slack: 1e-10,
    })
    .unwrap();
    verdict("criterion 01 pointwise sandwich", 30.0, started, &rep);
}

#[test]
fn criterion_02_kernel_spectrum() {
    let started = Instant::now();
    let rep = kernel_suite(&KernelConfig {
        max_size: 50,
        eig_slack: 1e-12,
        radius_slack: 1e-12,
    })
    .unwrap();
    verdict("criterion 02 kernel spectrum", 5.0, started, &rep);
}

#[test]
fn criterion_03_closed_form_vs_quadrature() {
    let started = Instant::now();
    let rep = closed_form_suite(&ClosedFormConfig {
        seed: 11,
        samples: 100,
        min_depth: 2,
        max_depth: 10,
        rel_tol: 1e-8,
    })
    .unwrap();
    verdict("criterion 03 closed form vs quadrature", 60.0, started, &rep);
}

#[test]
fn criterion_04_semigroup_axioms() {
    let started = Instant::now();
    let rep = axioms_suite(&AxiomsConfig {
        seed: 13,
        depth: 8,
        samples: 24,
        grid_len: 30,
        tol: 1e-10,
    })
    .unwrap();
    verdict("criterion 04 semigroup axioms", 30.0, started, &rep);
}

#[test]
fn criterion_05_gamma_construction() {
    let started = Instant::now();
    let rep = gamma_suite(&GammaConfig {
        q_list: vec![1.0, 2.0, 3.0],
        depth: 6,
        m_scale: 1.0,
        solver_tol: 1e-12,
        identity_tol: 1e-10,
        closed_form_tol: 1e-12,
        partition_tol: 1e-10,
    })
    .unwrap();
    verdict("criterion 05 gamma construction", 10.0, started, &rep);
}

#[test]
fn criterion_06_vector_equivalence() {
    let started = Instant::now();
    let rep = equivalence_suite(&EquivalenceConfig {
        seed: 17,
        samples: 500,
        q_list: vec![1.0, 2.0, 3.0],
        fiber_dim: 4,
        min_depth: 2,
        max_depth: 6,
        m_scale: 1.0,
        slack: 1e-8,
    })
    .unwrap();
    verdict("criterion 06 vector equivalence", 300.0, started, &rep);
}

#[test]
fn criterion_07_nc_operator_order() {
    let started = Instant::now();
    let rep = nc_suite(&NcConfig {
        seed: 19,
        samples: 400,
        factor_dims: vec![2, 2, 2, 2],
        tol: 1e-10,
        bridge_samples: 16,
    })
    .unwrap();
    verdict("criterion 07 operator order", 120.0, started, &rep);
}

#[test]
fn criterion_08_square_function_lp() {
    let started = Instant::now();
    let rep = bg_suite(&BgConfig {
        seed: 23,
        samples: 1000,
        p_list: vec![1.5, 2.0, 3.0, 8.0],
        min_depth: 2,
        max_depth: 6,
        slack: 1e-10,
        isometry_tol: 1e-10,
    })
    .unwrap();
    verdict("criterion 08 square function L_p", 60.0, started, &rep);
}

#[test]
fn criterion_09_ratio_growth() {
    let started = Instant::now();
    let out = growth_suite(&GrowthConfig {
        seed: 2026,
        budget: 100_000,
        depth: 12,
        p_list: vec![2.0, 4.0, 8.0, 16.0],
        depth2_budget: 512,
        attain_tol: 1e-6,
    })
    .unwrap();
    let table = out.table.as_ref().expect("table present when monotone");
    assert_eq!(table.rows.len(), 4);
    verdict("criterion 09 ratio growth", 300.0, started, &out.report);
}

#[test]
fn criterion_10_determinism() {
    let started = Instant::now();
    let mut all = true;

    let mut pair = |name: &str, a: String, b: String| {
        let same = a == b;
        all &= same;
        assert!(same, "{name} reports differ between identical runs");
    };

    let sw = SandwichConfig {
        seed: 41,
        depth: 4,
        samples: 25,
        slack: 1e-10,
    };
    pair(
        "sandwich",
        sandwich_suite(&sw).unwrap().to_json_string().unwrap(),
        sandwich_suite(&sw).unwrap().to_json_string().unwrap(),
    );

    let ke = KernelConfig {
        max_size: 20,
        eig_slack: 1e-12,
        radius_slack: 1e-12,
    };
    pair(
        "kernel",
        kernel_suite(&ke).unwrap().to_json_string().unwrap(),
        kernel_suite(&ke).unwrap().to_json_string().unwrap(),
    );

    let cf = ClosedFormConfig {
        seed: 43,
        samples: 8,
        min_depth: 2,
        max_depth: 5,
        rel_tol: 1e-8,
    };
    pair(
        "closed form",
        closed_form_suite(&cf).unwrap().to_json_string().unwrap(),
        closed_form_suite(&cf).unwrap().to_json_string().unwrap(),
    );

    let ax = AxiomsConfig {
        seed: 47,
        depth: 5,
        samples: 6,
        grid_len: 12,
        tol: 1e-10,
    };
    pair(
        "axioms",
        axioms_suite(&ax).unwrap().to_json_string().unwrap(),
        axioms_suite(&ax).unwrap().to_json_string().unwrap(),
    );

    let ga = GammaConfig {
        q_list: vec![1.0, 2.5],
        depth: 5,
        m_scale: 1.0,
        solver_tol: 1e-12,
        identity_tol: 1e-10,
        closed_form_tol: 1e-12,
        partition_tol: 1e-10,
    };
    pair(
        "gamma",
        gamma_suite(&ga).unwrap().to_json_string().unwrap(),
        gamma_suite(&ga).unwrap().to_json_string().unwrap(),
    );

    let eq = EquivalenceConfig {
        seed: 53,
        samples: 9,
        q_list: vec![1.0, 2.0],
        fiber_dim: 3,
        min_depth: 2,
        max_depth: 4,
        m_scale: 1.0,
        slack: 1e-8,
    };
    pair(
        "equivalence",
        equivalence_suite(&eq).unwrap().to_json_string().unwrap(),
        equivalence_suite(&eq).unwrap().to_json_string().unwrap(),
    );

    let nc = NcConfig {
        seed: 59,
        samples: 10,
        factor_dims: vec![2, 2, 2],
        tol: 1e-10,
        bridge_samples: 4,
    };
    pair(
        "nc",
        nc_suite(&nc).unwrap().to_json_string().unwrap(),
        nc_suite(&nc).unwrap().to_json_string().unwrap(),
    );

    let bg = BgConfig {
        seed: 61,
        samples: 40,
        p_list: vec![1.5, 2.0, 4.0],
        min_depth: 2,
        max_depth: 4,
        slack: 1e-10,
        isometry_tol: 1e-10,
    };
    pair(
        "bg",
        bg_suite(&bg).unwrap().to_json_string().unwrap(),
        bg_suite(&bg).unwrap().to_json_string().unwrap(),
    );

    let gr = GrowthConfig {
        seed: 67,
        budget: 96,
        depth: 3,
        p_list: vec![2.0, 3.0],
        depth2_budget: 48,
        attain_tol: 1e-6,
    };
    pair(
        "growth",
        growth_suite(&gr).unwrap().report.to_json_string().unwrap(),
        growth_suite(&gr).unwrap().report.to_json_string().unwrap(),
    );

    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 10 determinism: {} ({elapsed:.1}s)",
        if all { "PASS" } else { "FAIL" }
    );
}
