//! Fixtures shared by the benchmarks.

use idspace::data::{extract_subimages, generate_scene, InteractionImage, PROTOTYPE_COUNT};
use idspace::Descriptor;

/// One labeled crop per scene, cycling through the prototypes.
pub fn crops(n: usize) -> Vec<InteractionImage> {
    (0..n)
        .flat_map(|i| {
            let scene = generate_scene(i % PROTOTYPE_COUNT, i as u64).expect("scene");
            extract_subimages(&scene, 1, 0.1, i as u64).expect("crop")
        })
        .collect()
}

/// `n` descriptors of dimension `d` in loose per-type clusters.
pub fn descriptors(n: usize, d: usize) -> Vec<Descriptor> {
    (0..n)
        .map(|i| {
            let k = i % PROTOTYPE_COUNT;
            Descriptor::new(
                (0..d)
                    .map(|j| if j % PROTOTYPE_COUNT == k { 3.0 } else { 0.0 } + ((i * 31 + j * 17) % 13) as f64 * 0.05)
                    .collect(),
            )
        })
        .collect()
}
