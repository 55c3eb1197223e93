mod common;

use adaptmt::checkpoint::{checkpoint, open_project, read_progress, restore, Checkpoint, CHECKPOINT_VERSION};
use adaptmt::files::{load_config, resolve};
use adaptmt::Error;
use adaptmt_core::adaptation::{AdaptiveSession, ModelConfig, TrainingPair};
use common::{system, write_project};

fn fresh(cfg: ModelConfig) -> AdaptiveSession {
    let s = system();
    AdaptiveSession::new(s.model.clone(), s.pipeline.clone(), cfg).unwrap()
}

#[test]
fn restore_translates_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_project(dir.path(), "p1", |_| {});
    let (mut session, paths) = open_project(&conf).unwrap();
    for (i, (src, pe)) in system().corpus.test.iter().take(3).enumerate() {
        session.confirm_and_update(TrainingPair::new(&i.to_string(), src, pe, 100 + i as u64)).unwrap();
    }
    checkpoint(&session, &paths.checkpoint).unwrap();
    let back = restore(&paths.checkpoint, session.config().clone(), &paths.bpe).unwrap();
    assert_eq!(back.model(), session.model());
    assert_eq!(back.update_log(), session.update_log());
    assert_eq!(back.pipeline(), session.pipeline());
    for (src, _) in &system().corpus.test {
        assert_eq!(back.translate_segment(src).unwrap(), session.translate_segment(src).unwrap());
    }
    assert_eq!(read_progress(&paths.checkpoint).unwrap(), (3, Some(102)));
}

#[test]
fn replay_from_checkpoint_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let bpe = dir.path().join("m.bpe");
    adaptmt::files::save_bpe(&system().pipeline.bpe, &bpe).unwrap();
    let doc = &system().corpus.test[..8];
    let pair = |i: usize| TrainingPair::new(&i.to_string(), &doc[i].0, &doc[i].1, i as u64);

    let mut straight = fresh(common_config());
    let mut losses = Vec::new();
    for i in 0..doc.len() {
        losses.push(straight.confirm_and_update(pair(i)).unwrap().post_loss);
        if i == 3 {
            checkpoint(&straight, &path).unwrap();
        }
    }
    let mut resumed = restore(&path, common_config(), &bpe).unwrap();
    assert_eq!(resumed.updates_applied(), 4);
    for i in 4..doc.len() {
        assert_eq!(resumed.confirm_and_update(pair(i)).unwrap().post_loss, losses[i]);
    }
    assert_eq!(resumed.model().fingerprint(), straight.model().fingerprint());
}

fn common_config() -> ModelConfig {
    ModelConfig::new("p", "en", "fr", "m.bpe", "m.ckpt")
}

#[test]
fn version_and_corruption_are_detected() {
    let s = fresh(common_config());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    checkpoint(&s, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(format!("{CHECKPOINT_VERSION}\n").as_bytes()));

    let mut wrong = bytes.clone();
    wrong[CHECKPOINT_VERSION.len() - 1] = b'9';
    let err = Checkpoint::decode(&wrong).unwrap_err();
    assert!(matches!(err, Error::IncompatibleCheckpoint(_)), "{err}");
    assert!(err.to_string().starts_with("incompatible checkpoint"));

    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(Checkpoint::decode(&flipped), Err(Error::CorruptCheckpoint(_))));
    assert!(matches!(Checkpoint::decode(&bytes[..bytes.len() - 100]), Err(Error::CorruptCheckpoint(_))));
    assert!(matches!(Checkpoint::decode(b"hello\nworld"), Err(Error::CorruptCheckpoint(_))));
    assert!(matches!(Checkpoint::decode(b""), Err(Error::CorruptCheckpoint(_))));

    std::fs::write(&path, &wrong).unwrap();
    let bpe = dir.path().join("m.bpe");
    adaptmt::files::save_bpe(&system().pipeline.bpe, &bpe).unwrap();
    assert!(matches!(restore(&path, common_config(), &bpe), Err(Error::IncompatibleCheckpoint(_))));
}

#[test]
fn encode_decode_is_lossless() {
    let s = fresh(common_config());
    let ckpt = Checkpoint {
        arch: *s.model().arch(),
        rng_seed: s.model().rng_seed(),
        params: s.model().cast::<f64>().params().clone(),
        src_vocab_ref: "a.vocab".into(),
        tgt_vocab_ref: "b vocab \"quoted\"".into(),
        update_log: vec![],
    };
    assert_eq!(Checkpoint::decode(&ckpt.encode()).unwrap(), ckpt);
}

#[test]
fn config_files_load_with_defaults_and_resolve_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.conf");
    std::fs::write(
        &path,
        "version: 1\nproject_id: x\nsrc_lang: en\ntgt_lang: de\nbpe_model_path: models/x.bpe\ncheckpoint_path: /abs/x.ckpt\n",
    )
    .unwrap();
    let c = load_config(&path).unwrap();
    assert_eq!((c.beam_size, c.ol_iterations, c.checkpoint_every), (1, 1, 10));
    assert_eq!(resolve(&path, &c.bpe_model_path), dir.path().join("models/x.bpe"));
    assert_eq!(resolve(&path, &c.checkpoint_path), std::path::PathBuf::from("/abs/x.ckpt"));
    std::fs::write(&path, "version: 1\nproject_id: x\n").unwrap();
    let err = load_config(&path).unwrap_err();
    assert!(err.to_string().contains("src_lang"), "{err}");
    assert!(matches!(load_config(&dir.path().join("missing.conf")), Err(Error::Io { .. })));
}
