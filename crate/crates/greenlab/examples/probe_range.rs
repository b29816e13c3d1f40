use greenlab::dimension;
use greenlab::projective::ProjPoint;
use greenlab::quasi;

fn main() {
    let pts: Vec<ProjPoint> = quasi::projective_uniform(1, 5000)
        .into_iter()
        .map(|v| ProjPoint::new(v).unwrap())
        .collect();
    println!("{:?}", dimension::auto_radius_range(&pts));
    let pts2: Vec<ProjPoint> = quasi::projective_uniform(1, 2600)
        .into_iter()
        .map(|v| ProjPoint::new(v).unwrap())
        .collect();
    println!("{:?}", dimension::auto_radius_range(&pts2));
}
