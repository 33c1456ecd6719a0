//! Regenerates the files under `data/`: a campus-like scene, a receiver
//! route, parameter presets, and a synthetic annotated panorama with its
//! reference points, pixel labels and the foliage twin built from them.
//!
//! Run with `cargo run --release -p dtecm-core --example make_fixtures [out_dir]`.

use std::path::PathBuf;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use dtecm_core::foliage::{
    build_twin, erp_pixel_to_camera, rotate_zyz, save_twin, solve_pose, ErpParams, PoseRotation, TwinBuildConfig,
};
use dtecm_core::io::{self, LabelRecord, RefRecord};
use dtecm_core::raytrace::{geometric_los, trace_first_order};
use dtecm_core::scene::{save_scene, Building, Scene};
use dtecm_core::stochastic::params::params_to_string;
use dtecm_core::{Direction, StateParamSet, Vec3};

const WIDTH: u32 = 960;
const HEIGHT: u32 = 480;
const CAMERA_POSE: (f64, f64, f64) = (87.3, 3.6, 104.1);

fn campus() -> Scene {
    let mut scene = Scene::free_space(Vec3::new(0.0, 0.0, 16.6), 220e9);
    scene.buildings = vec![
        // the building carrying the transmitter, directly behind it
        Building::rectangle([-50.0, 0.5], [50.0, 25.0], 25.0),
        Building::rectangle([-120.0, -130.0], [-70.0, -100.0], 20.0),
        Building::rectangle([40.0, -160.0], [90.0, -120.0], 8.0),
        Building::rectangle([-30.0, -260.0], [30.0, -230.0], 15.0),
        Building::rectangle([110.0, -60.0], [160.0, -20.0], 18.0),
        Building::rectangle([-200.0, -40.0], [-160.0, 0.0], 22.0),
        Building::rectangle([150.0, -300.0], [220.0, -200.0], 30.0).with_reflection_loss(8.0),
        Building::rectangle([-280.0, -260.0], [-240.0, -110.0], 24.0),
    ];
    scene
}

/// Tree crowns as discs in (azimuth, elevation), degrees.
const CROWNS: [(f64, f64, f64); 6] = [
    (-60.0, -6.0, 5.0),
    (-100.0, -4.5, 4.0),
    (-140.0, -8.0, 6.0),
    (-25.0, -3.0, 3.0),
    (-165.0, -5.0, 4.0),
    (-80.0, 12.0, 8.0),
];

/// Blue glass patches that survive the color prefilter but are not foliage.
const GLASS: [(f64, f64, f64); 3] = [(-120.0, 2.0, 4.0), (-45.0, 5.0, 3.0), (60.0, 4.0, 5.0)];

fn in_disc(d: Direction, discs: &[(f64, f64, f64)]) -> bool {
    discs.iter().any(|&(az, el, r)| {
        let daz = dtecm_core::geometry::wrap_deg(d.azimuth - az);
        (daz * daz + (d.elevation - el).powi(2)).sqrt() < r
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Surface {
    Foliage,
    Glass,
    Sky,
    Ground,
}

fn surface(world: Direction) -> Surface {
    if in_disc(world, &CROWNS) {
        Surface::Foliage
    } else if in_disc(world, &GLASS) {
        Surface::Glass
    } else if world.elevation > 0.0 {
        Surface::Sky
    } else {
        Surface::Ground
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: [f64; 3], sigma: f64) -> Rgb<u8> {
    let n = Normal::new(0.0, sigma).expect("positive sigma");
    Rgb(base.map(|c| (c + n.sample(rng)).round().clamp(0.0, 255.0) as u8))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_220);

    let scene = campus();
    save_scene(&scene, out.join("campus_scene.json"))?;

    // receiver route alternating between open ground and building shadows
    let mut route = String::from("name,x,y,z\n");
    for k in 0..42 {
        let t = k as f64 / 41.0;
        let (x, y) = (-235.0 + 305.0 * t, -170.0 - 45.0 * t);
        route.push_str(&format!("rx{:02},{x:.2},{y:.2},1.6\n", k + 1));
        let rx = Vec3::new(x, y, 1.6);
        let los = geometric_los(&scene, rx)?.is_clear();
        eprintln!("rx{:02} ({x:.1}, {y:.1}) los {los} paths {}", k + 1, trace_first_order(&scene, rx).len());
    }
    std::fs::write(out.join("route_42.csv"), route)?;

    std::fs::write(out.join("params_campaign.toml"), params_to_string(&StateParamSet::campaign()))?;
    std::fs::write(out.join("params_validation.toml"), params_to_string(&StateParamSet::validation()))?;

    let erp = ErpParams::full_sphere(WIDTH, HEIGHT);
    let pose = PoseRotation::new(CAMERA_POSE.0, CAMERA_POSE.1, CAMERA_POSE.2);
    let mut image = RgbImage::new(WIDTH, HEIGHT);
    let mut surfaces = Vec::with_capacity((WIDTH * HEIGHT) as usize);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let world = rotate_zyz(pose, erp_pixel_to_camera(x, y, &erp)?);
            let s = surface(world);
            let px = match s {
                Surface::Foliage => jitter(&mut rng, [63.0, 71.0, 204.0], 9.0),
                Surface::Glass => jitter(&mut rng, [84.0, 92.0, 212.0], 9.0),
                Surface::Sky => jitter(&mut rng, [150.0, 190.0, 240.0], 6.0),
                Surface::Ground => jitter(&mut rng, [110.0, 105.0, 100.0], 12.0),
            };
            image.put_pixel(x, y, px);
            surfaces.push(s);
        }
    }
    image.save(out.join("panorama.png"))?;

    let refs: Vec<RefRecord> = [(100, 200), (400, 120), (700, 300), (850, 180), (250, 380), (550, 60)]
        .iter()
        .enumerate()
        .map(|(k, &(px, py))| {
            let world = rotate_zyz(pose, erp_pixel_to_camera(px, py, &erp).expect("in range"));
            RefRecord {
                name: format!("ref{}", k + 1),
                pixel_x: px,
                pixel_y: py,
                world_az_deg: world.azimuth,
                world_el_deg: world.elevation,
            }
        })
        .collect();
    io::write_refs(out.join("refs.csv"), &refs)?;

    // labels: foliage and glass pixels, plus a few plainly different ones
    let mut labels = Vec::new();
    let quota =
        [(Surface::Foliage, 600usize, 1u8), (Surface::Glass, 450, 0), (Surface::Sky, 75, 0), (Surface::Ground, 75, 0)];
    for (kind, count, class) in quota {
        let pool: Vec<usize> = surfaces.iter().enumerate().filter(|(_, s)| **s == kind).map(|(i, _)| i).collect();
        for _ in 0..count.min(pool.len()) {
            let k = pool[rng.random_range(0..pool.len())];
            labels.push(LabelRecord { pixel_x: k as u32 % WIDTH, pixel_y: k as u32 / WIDTH, class });
        }
    }
    labels.sort_by_key(|l| (l.pixel_y, l.pixel_x));
    labels.dedup_by_key(|l| (l.pixel_y, l.pixel_x));
    io::write_labels(out.join("labels.csv"), &labels)?;

    let refs_back = io::pose_references(&refs, &erp)?;
    let solved = solve_pose(&refs_back)?;
    eprintln!("recovered pose {:?}", solved.pose);
    let training = io::labeled_pixels(&image, &labels)?;
    let (train, _) = training.split(0.6, dtecm_core::seed::derive_seed(0, 0));
    let twin = build_twin(&image, &erp, solved.pose, &train, &TwinBuildConfig::default())?;
    eprintln!("twin foliage cells: {}", twin.mask.count());
    save_twin(&twin, out.join("twin.json"))?;
    Ok(())
}
