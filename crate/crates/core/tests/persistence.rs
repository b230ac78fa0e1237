mod common;

use gmc_core::featurize::Featurizer;
use gmc_core::mpnn::{
    init_model, load_checkpoint, predict_batch, save_checkpoint, CheckpointError, MpnnError,
    CHECKPOINT_VERSION,
};
use gmc_core::wcs::{read_cache, write_cache, CacheError, FeatureCache, CACHE_VERSION};
use gmc_core::{AblationMask, KernelKind, TaskKind};

fn bits(m: &gmc_core::ModelParams) -> Vec<u64> {
    m.tensors()
        .into_iter()
        .flat_map(|(_, t)| t.iter().map(|x| x.to_bits()).collect::<Vec<_>>())
        .collect()
}

#[test]
fn feature_cache_round_trip_is_bit_exact() {
    let records = common::records(TaskKind::Classification);
    let f = Featurizer::new(common::wcs_params(&records), AblationMask::empty());
    let cache = f.build_cache(&records);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wcs.gmcw");
    write_cache(&path, &cache).unwrap();
    let back = read_cache(&path, Some(&f.fingerprint())).unwrap();
    assert_eq!(back.fingerprint, cache.fingerprint);
    assert_eq!(back.entries.len(), cache.entries.len());
    for ((ia, a), (ib, b)) in cache.entries.iter().zip(&back.entries) {
        assert_eq!(ia, ib);
        assert_eq!(a.dim(), b.dim());
        assert!(a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(
        f.featurize_from_cache(&records, &back).unwrap(),
        f.featurize_all(&records)
    );
}

#[test]
fn feature_cache_mismatches_are_typed() {
    let records = common::records(TaskKind::Classification);
    let f = Featurizer::new(common::wcs_params(&records), AblationMask::empty());
    let cache = f.build_cache(&records[..4]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wcs.gmcw");
    write_cache(&path, &cache).unwrap();

    let mut other = common::wcs_params(&records);
    other.kernel = KernelKind::Lorentz;
    let g = Featurizer::new(other, AblationMask::empty());
    assert!(matches!(
        read_cache(&path, Some(&g.fingerprint())),
        Err(CacheError::FingerprintMismatch { .. })
    ));

    let mut bytes = cache.to_bytes();
    bytes[4..8].copy_from_slice(&(CACHE_VERSION + 1).to_le_bytes());
    assert!(matches!(
        FeatureCache::from_bytes(&bytes),
        Err(CacheError::VersionMismatch { found, expected }) if found == CACHE_VERSION + 1 && expected == CACHE_VERSION
    ));
    let truncated = &cache.to_bytes()[..40];
    assert!(matches!(
        FeatureCache::from_bytes(truncated),
        Err(CacheError::Corrupt(_))
    ));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let records = common::records(TaskKind::Regression);
    let graphs = common::graphs(&records);
    let mut config = common::tiny_config(TaskKind::Regression);
    config.activation = gmc_core::mpnn::Activation::Prelu;
    let mut model = init_model(&config, graphs[0].node_width(), 17);
    model.fingerprint = graphs[0].fingerprint.clone();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gmcm");
    save_checkpoint(&model, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(bits(&back), bits(&model));
    let a = predict_batch(&model, &graphs).unwrap();
    let b = predict_batch(&back, &graphs).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn checkpoint_mismatches_are_typed() {
    let records = common::records(TaskKind::Classification);
    let graphs = common::graphs(&records);
    let mut model = init_model(&common::tiny_config(TaskKind::Classification), 187, 1);
    model.fingerprint = graphs[0].fingerprint.clone();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gmcm");
    save_checkpoint(&model, &path).unwrap();

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 7).to_le_bytes());
    let bumped = dir.path().join("bumped.gmcm");
    std::fs::write(&bumped, &bytes).unwrap();
    assert!(matches!(
        load_checkpoint(&bumped),
        Err(CheckpointError::VersionMismatch { found, .. }) if found == CHECKPOINT_VERSION + 7
    ));

    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.gmcm");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(
        load_checkpoint(&cut),
        Err(CheckpointError::CorruptCheckpoint(_))
    ));

    let mut params = common::wcs_params(&records);
    params.tau = 2.5;
    let other = Featurizer::new(params, AblationMask::empty()).featurize_all(&records[..2]);
    let loaded = load_checkpoint(&path).unwrap();
    assert!(matches!(
        predict_batch(&loaded, &other),
        Err(MpnnError::FingerprintMismatch { .. })
    ));
}
