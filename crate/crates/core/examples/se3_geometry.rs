//! Exponential and logarithm maps, composition and projection of a point.

use drslam::camera::CameraIntrinsics;
use drslam::se3::{Pose, Twist};
use nalgebra::Vector3;

fn main() {
    let xi = Twist::new(Vector3::new(0.5, -0.2, 1.0), Vector3::new(0.1, 0.4, -0.3));
    let t = Pose::exp(&xi);
    let back = t.log().expect("angle below pi");
    println!("twist      {:?}", xi.to_vector().as_slice());
    println!("log(exp)   {:?}", back.to_vector().as_slice());
    println!("rotation   {:.4} rad", t.rotation_angle());

    let u = Pose::from_translation(Vector3::new(0.0, 0.0, 2.0));
    let tu = t.compose(&u);
    let roundtrip = tu.compose(&tu.inverse());
    println!("T*T^-1 translation {:.2e}", roundtrip.translation().norm());

    let k = CameraIntrinsics::default();
    let world = Vector3::new(0.3, -0.1, 4.0);
    let camera = Pose::identity().inverse().transform_point(&world);
    match k.project(&camera) {
        Ok(uv) => println!("pixel      ({:.2}, {:.2})", uv.x, uv.y),
        Err(e) => println!("not visible: {e}"),
    }
}
