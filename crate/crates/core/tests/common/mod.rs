#![allow(dead_code)]

use drslam::config::{preset, RunConfig};
use drslam::se3::{exp_so3, Pose};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random rotation with angle below `max_angle` and translation in a cube.
pub fn random_pose(rng: &mut impl Rng, max_angle: f64, extent: f64) -> Pose {
    let axis = unit_vector(rng);
    let angle = rng.random_range(0.0..max_angle);
    let q: UnitQuaternion<f64> = exp_so3(&(axis * angle));
    let t = Vector3::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    );
    Pose::new(q, t)
}

pub fn preset_config(name: &str) -> RunConfig {
    RunConfig::parse_str(preset(name).expect("bundled preset")).expect("valid preset")
}

/// Largest absolute entry of `a - b` over the largest absolute entry of `b`
/// (at least 1).
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub mod jacobians {
    use super::{random_pose, rng, unit_vector};
    use drslam::camera::CameraIntrinsics;
    use drslam::factors::{
        depth_residual, dr_residual, reprojection_residual, DepthFactor, DrFactor, ReprojectionFactor,
    };
    use drslam::se3::{exp_so3, Pose};
    use nalgebra::{DMatrix, Matrix6, Vector2, Vector3, Vector6};
    use rand::Rng;

    const H: f64 = 1e-6;

    fn rel(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
        (analytic - fd).abs().max() / fd.abs().max().max(1e-12)
    }

    /// Central differences of `f` over tangent perturbations `pose * exp(d)`.
    fn fd_pose(pose: &Pose, rows: usize, f: impl Fn(&Pose) -> Vec<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(rows, 6);
        for k in 0..6 {
            let mut d = Vector6::zeros();
            d[k] = H;
            let plus = f(&pose.retract(&d));
            let minus = f(&pose.retract(&-d));
            for r in 0..rows {
                j[(r, k)] = (plus[r] - minus[r]) / (2.0 * H);
            }
        }
        j
    }

    fn fd_point(x: &Vector3<f64>, rows: usize, f: impl Fn(&Vector3<f64>) -> Vec<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(rows, 3);
        for k in 0..3 {
            let mut d = Vector3::zeros();
            d[k] = H;
            let plus = f(&(x + d));
            let minus = f(&(x - d));
            for r in 0..rows {
                j[(r, k)] = (plus[r] - minus[r]) / (2.0 * H);
            }
        }
        j
    }

    /// Pose and a landmark projecting well inside the image at 1-6 m depth.
    fn visible_point(r: &mut impl Rng, k: &CameraIntrinsics) -> (Pose, Vector3<f64>) {
        let pose = random_pose(r, 3.0, 5.0);
        let z = r.random_range(1.0..6.0);
        let u = r.random_range(50.0..(k.width as f64 - 50.0));
        let v = r.random_range(50.0..(k.height as f64 - 50.0));
        let pc = k.backproject(&Vector2::new(u, v), z);
        (pose, pose.transform_point(&pc))
    }

    /// Worst relative Jacobian error of the reprojection factor.
    pub fn reprojection(configs: usize, seed: u64) -> f64 {
        let k = CameraIntrinsics::default();
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..configs {
            let (pose, x) = visible_point(&mut r, &k);
            let obs = Vector2::new(r.random_range(10.0..630.0), r.random_range(10.0..470.0));
            let f = ReprojectionFactor::new(0, 0, obs, 1.0, k).unwrap();
            let lin = reprojection_residual(&f, &pose, &x).unwrap();
            let res = |p: &Pose, x: &Vector3<f64>| {
                let l = reprojection_residual(&f, p, x).unwrap();
                vec![l.residual.x, l.residual.y]
            };
            let jp = fd_pose(&pose, 2, |p| res(p, &x));
            let jl = fd_point(&x, 2, |x| res(&pose, x));
            let ap = DMatrix::from_column_slice(2, 6, lin.j_pose.as_slice());
            let al = DMatrix::from_column_slice(2, 3, lin.j_landmark.as_slice());
            worst = worst.max(rel(&ap, &jp)).max(rel(&al, &jl));
        }
        worst
    }

    /// Worst relative Jacobian error of the depth factor.
    pub fn depth(configs: usize, seed: u64) -> f64 {
        let k = CameraIntrinsics::default();
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..configs {
            let (pose, x) = visible_point(&mut r, &k);
            let f = DepthFactor::new(0, 0, r.random_range(1.0..6.0), 0.01).unwrap();
            let lin = depth_residual(&f, &pose, &x).unwrap();
            let res = |p: &Pose, x: &Vector3<f64>| vec![depth_residual(&f, p, x).unwrap().residual];
            let jp = fd_pose(&pose, 1, |p| res(p, &x));
            let jl = fd_point(&x, 1, |x| res(&pose, x));
            let ap = DMatrix::from_column_slice(1, 6, lin.j_pose.as_slice());
            let al = DMatrix::from_column_slice(1, 3, lin.j_landmark.as_slice());
            worst = worst.max(rel(&ap, &jp)).max(rel(&al, &jl));
        }
        worst
    }

    /// Worst relative Jacobian error of the DR factor. Residual rotations
    /// reach about 1 rad.
    pub fn dr(configs: usize, seed: u64) -> f64 {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..configs {
            let a = random_pose(&mut r, 3.0, 5.0);
            let b = random_pose(&mut r, 3.0, 5.0);
            let err = Pose::new(
                exp_so3(&(unit_vector(&mut r) * r.random_range(0.0..1.0))),
                Vector3::new(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)),
            );
            let delta = a.inverse().compose(&b).compose(&err.inverse());
            let f = DrFactor::new(0, 1, delta, Matrix6::identity()).unwrap();
            let lin = dr_residual(&f, &a, &b).unwrap();
            let res = |p: &Pose, q: &Pose| dr_residual(&f, p, q).unwrap().residual.to_vector().as_slice().to_vec();
            let ja = fd_pose(&a, 6, |p| res(p, &b));
            let jb = fd_pose(&b, 6, |q| res(&a, q));
            let aa = DMatrix::from_column_slice(6, 6, lin.j_from.as_slice());
            let ab = DMatrix::from_column_slice(6, 6, lin.j_to.as_slice());
            worst = worst.max(rel(&aa, &ja)).max(rel(&ab, &jb));
        }
        worst
    }
}

pub mod problems {
    use super::rng;
    use drslam::camera::CameraIntrinsics;
    use drslam::factors::{DepthFactor, DrFactor, ReprojectionFactor};
    use drslam::optimizer::Problem;
    use drslam::quality::{scale_information, NominalDrInformation};
    use drslam::se3::{exp_so3, Pose};
    use nalgebra::{Vector2, Vector3, Vector6};
    use rand::Rng;

    /// Random bundle adjustment problem: up to `max_poses` cameras strung
    /// along x looking down +z, up to `max_landmarks` points in front, every
    /// point seen by at least two cameras, consecutive cameras joined by DR
    /// factors with random weights, the first camera fixed. Initial values
    /// are perturbed from the truth.
    pub fn random_problem(seed: u64, max_poses: usize, max_landmarks: usize) -> Problem {
        let mut r = rng(seed);
        let k = CameraIntrinsics::default();
        let np = r.random_range(2..=max_poses);
        let nl = r.random_range(10..=max_landmarks);
        let truth: Vec<Pose> = (0..np)
            .map(|i| {
                let phi = Vector3::new(r.random_range(-0.05..0.05), r.random_range(-0.05..0.05), r.random_range(-0.05..0.05));
                Pose::new(exp_so3(&phi), Vector3::new(0.3 * i as f64, r.random_range(-0.1..0.1), r.random_range(-0.1..0.1)))
            })
            .collect();
        let mut p = Problem::new();
        for (i, t) in truth.iter().enumerate() {
            let noise = Vector6::from_fn(|_, _| r.random_range(-0.02..0.02));
            let init = if i == 0 { *t } else { t.retract(&noise) };
            p.add_pose(i as u64, init, i == 0);
        }
        let nominal = NominalDrInformation::from_degrees(0.004, 0.1);
        for i in 1..np {
            let delta = truth[i - 1].inverse().compose(&truth[i]);
            let alpha = 10f64.powf(r.random_range(-1.0..3.0));
            let f = DrFactor::new(i - 1, i, delta, scale_information(alpha, &nominal)).unwrap();
            p.add_dr(f).unwrap();
        }
        let mut added = 0;
        while added < nl {
            let x = Vector3::new(
                r.random_range(-1.5..(0.3 * np as f64 + 1.5)),
                r.random_range(-1.5..1.5),
                r.random_range(4.0..8.0),
            );
            let mut obs = Vec::new();
            for (i, t) in truth.iter().enumerate() {
                let pc = t.inverse().transform_point(&x);
                if let Ok(uv) = k.project(&pc) {
                    let uv = uv + Vector2::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
                    if k.in_image(&uv) {
                        obs.push((i, uv, pc.z));
                    }
                }
            }
            if obs.len() < 2 {
                continue;
            }
            let init = x + Vector3::from_fn(|_, _| r.random_range(-0.05..0.05));
            let l = p.add_landmark(added as u64, init, false);
            for (i, uv, z) in obs {
                p.add_reprojection(ReprojectionFactor::new(i, l, uv, 1.0, k).unwrap()).unwrap();
                if r.random_bool(0.3) {
                    p.add_depth(DepthFactor::quadratic(i, l, z, 0.005).unwrap()).unwrap();
                }
            }
            added += 1;
        }
        p
    }
}

/// Removes every noise source and drop-out from the simulated world.
pub fn make_noiseless(c: &mut RunConfig) {
    for (k, v) in [
        ("sim_pixel_std", "0"),
        ("dr_sigma_t", "0"),
        ("dr_sigma_r_deg", "0"),
        ("dr_scale_bias", "0"),
        ("dr_yaw_bias_deg", "0"),
        ("dropouts", ""),
    ] {
        c.set(k, v).unwrap();
    }
}

pub mod linearity {
    use super::problems::random_problem;
    use drslam::factors::dr_residual;
    use drslam::optimizer::{build_normal_equations, Problem};
    use drslam::quality::{scale_information, NominalDrInformation};
    use nalgebra::DMatrix;

    fn pose_block(h: &DMatrix<f64>, a: usize, b: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(12, 12);
        for (bi, i) in [a, b].into_iter().enumerate() {
            for (bj, j) in [a, b].into_iter().enumerate() {
                m.view_mut((6 * bi, 6 * bj), (6, 6))
                    .copy_from(&h.view((6 * i, 6 * j), (6, 6)));
            }
        }
        m
    }

    /// `H(a2) - H(a1)` over the two poses of one DR factor, against
    /// `(a2 - a1) J^T S J` with `J = [J_from J_to]`. Returns the relative error.
    pub fn hessian_linearity_error(seed: u64) -> f64 {
        let mut p = random_problem(seed, 6, 30);
        for v in &mut p.poses {
            v.fixed = false;
        }
        let nominal = NominalDrInformation::from_degrees(0.004, 0.1);
        let (a1, a2) = (0.3, 700.0);
        let hess = |p: &mut Problem, alpha: f64| {
            p.dr[0].information = scale_information(alpha, &nominal);
            build_normal_equations(p).to_dense().0
        };
        let h1 = hess(&mut p, a1);
        let h2 = hess(&mut p, a2);
        let f = p.dr[0];
        let lin = dr_residual(&f, &p.poses[f.from].pose, &p.poses[f.to].pose).unwrap();
        let mut j = DMatrix::zeros(6, 12);
        j.view_mut((0, 0), (6, 6)).copy_from(&lin.j_from);
        j.view_mut((0, 6), (6, 6)).copy_from(&lin.j_to);
        let s = DMatrix::from_iterator(6, 6, nominal.matrix().iter().copied());
        let expected = (a2 - a1) * j.transpose() * s * j;
        let diff = &h2 - &h1;
        let got = pose_block(&diff, f.from, f.to);
        let mut rest = diff.clone();
        for i in [f.from, f.to] {
            for k in [f.from, f.to] {
                rest.view_mut((6 * i, 6 * k), (6, 6)).fill(0.0);
            }
        }
        let scale = expected.abs().max();
        ((got - &expected).abs().max()).max(rest.abs().max()) / scale
    }
}
