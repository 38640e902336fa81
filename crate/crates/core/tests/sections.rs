use bconf::section::{decompose_or_witness, BranchedSectionSample, Decomposition, Fiber};
use bconf::{AmbientSpace, Configuration, Point};

#[test]
fn spin_fiber_splits_into_two_constant_sections() {
    let fiber_space = AmbientSpace::euclidean(1);
    let spins = Configuration::from_rows(&fiber_space, [[0.0], [1.0]]).unwrap();
    let mut base = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                base.push(Point::new(vec![i as f64, j as f64, k as f64]).unwrap());
            }
        }
    }
    let fibers = vec![Fiber::Points(spins); base.len()];
    let s = BranchedSectionSample::new(base, fibers).unwrap();
    match decompose_or_witness(&s).unwrap() {
        Decomposition::Selections {
            selections,
            lipschitz_estimate,
        } => {
            assert_eq!(selections.len(), 2);
            assert!(selections[0].values.iter().all(|p| p.coords() == [0.0]));
            assert!(selections[1].values.iter().all(|p| p.coords() == [1.0]));
            assert_eq!(lipschitz_estimate, 0.0);
        }
        other => panic!("{other:?}"),
    }
}
