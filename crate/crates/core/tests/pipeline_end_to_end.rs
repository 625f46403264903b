use flowinpaint::io::{read_zfield, write_zfield};
use flowinpaint::metrics::{density_sweep, epe, genmask, subsample, SweepOptions};
use flowinpaint::pipeline::{inpaint, inpaint_homogeneous, PipelineConfig, Schedule};
use flowinpaint::synthetic::{edge_scene, EdgeSceneSpec};
use flowinpaint::{Field2D, ZField};

fn scene() -> flowinpaint::synthetic::Scene {
    edge_scene(&EdgeSceneSpec { width: 64, height: 48, ..EdgeSceneSpec::default() })
}

#[test]
fn identity_z_maps_equal_homogeneous_diffusion() {
    let s = scene();
    let mask = genmask(64, 48, 0.05, 2).unwrap();
    let sparse = subsample(&s.flow, &mask);
    // sigmoid(0) / 2 = 1/4; eigenvalues g(0) = 1; direction (1, 0)
    let z: Vec<ZField> = (0..4)
        .map(|k| ZField::new(Field2D::from_fn(64 >> k, 48 >> k, 5, |_, _, c| if c == 3 { 1.0 } else { 0.0 })).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.nxz");
    write_zfield(&path, &z).unwrap();
    let z = read_zfield(&path).unwrap();

    let cfg = PipelineConfig::neuroexplicit();
    let with_z = inpaint(&s.image, &mask, &sparse, &cfg, Some(&z)).unwrap();
    let mut hom_cfg = cfg.clone();
    hom_cfg.alpha = 0.25;
    let hom = inpaint_homogeneous(&mask, &sparse, &hom_cfg).unwrap();
    assert!(with_z.flow.max_abs_diff(&hom.flow) < 1e-12);
    assert_eq!(with_z.applications(), 95);
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let s = scene();
    let cfg = PipelineConfig::explicit_eed(1e-4, 0.3).with_levels(3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| density_sweep(&s.image, &s.flow, &[0.02, 0.1], &[1, 2], &cfg, &SweepOptions::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn eed_keeps_the_discontinuity_sharper() {
    let s = scene();
    let mask = genmask(64, 48, 0.05, 6).unwrap();
    let sparse = subsample(&s.flow, &mask);
    let cfg = PipelineConfig::explicit_eed(1e-4, 0.3);
    let eed = inpaint(&s.image, &mask, &sparse, &cfg, None).unwrap();
    let hom = inpaint_homogeneous(&mask, &sparse, &cfg).unwrap();
    assert!(eed.converged() && hom.converged());
    assert!(epe(&eed.flow, &s.flow, None).unwrap() < epe(&hom.flow, &s.flow, None).unwrap());
}

#[test]
fn fixed_budget_runs_exact_counts() {
    let s = scene();
    let mask = genmask(64, 48, 0.05, 1).unwrap();
    let sparse = subsample(&s.flow, &mask);
    let mut cfg = PipelineConfig::explicit_eed(1e-4, 0.3);
    cfg.schedule = Schedule::OneCyclePerLevel { iterations: vec![3, 7, 11, 13] };
    let out = inpaint(&s.image, &mask, &sparse, &cfg, None).unwrap();
    let counts: Vec<_> = out.levels.iter().map(|l| l.applications).collect();
    assert_eq!(counts, [3, 7, 11, 13]);
}
