use ontime::memory::MemoryConfig;
use ontime::readiness::readiness_score;
use ontime::reasoner::{reason, ProjectionPair, RetrievalConfig};
use ontime::{ModelF32, TreeF32, VectorF32};

#[test]
fn f32_stream_stays_bounded_and_scores_in_unit_range() {
    let dim = 8;
    let mut tree = TreeF32::new(MemoryConfig::default(), dim).unwrap();
    let model = ModelF32::new(dim, 6, 3).unwrap();
    let proj = ProjectionPair::<f32>::identity(dim);
    let query = VectorF32::new((0..dim).map(|i| (i as f32).cos()).collect()).unwrap();
    for step in 0..2000u32 {
        let s = step as f32;
        let frame = VectorF32::new(
            (0..dim)
                .map(|i| (s * 0.37 + i as f32 * 1.3).sin())
                .collect(),
        )
        .unwrap();
        tree.ingest_frame(frame, s).unwrap();
        let levels = tree.levels();
        assert!(
            levels.frames.len() <= 24
                && levels.centroids.len() <= 96
                && levels.prototypes.len() <= 12
        );
        if step % 50 == 0 {
            let state = reason(&query, levels, &proj, &RetrievalConfig::default()).unwrap();
            let r = readiness_score(&model, &state.z_l).unwrap();
            assert!((0.0..=1.0).contains(&r), "score {r} at step {step}");
        }
    }
    assert_eq!(tree.levels().total_centroid_weight(), 2000 - 24);
}
