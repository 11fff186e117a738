mod common;

use common::{mono_wav, tiny_run, tone_with_clicks, write_float, write_pcm16};
use ddsp_sfx::audio::{encode_wav, ingest};
use ddsp_sfx::cache::{load_split, preprocess, CacheIndex, FeatureRecord};
use ddsp_sfx::dataset::Split;
use ddsp_sfx::eval::{evaluate_corpus, EmbeddingFiles};
use ddsp_sfx::synth::{resolve_controls, synthesize, Source, SynthesisRequest, ZMode};
use ddsp_sfx::training::{log_path, train_from_cache};
use ddsp_sfx::{load_model, Error};
use ddsp_sfx_core::metrics::EmbeddingSet;
use ddsp_sfx_core::model::{Checkpoint, LossReport};
use ddsp_sfx_core::FrameConfig;

#[test]
fn ingestion_conforms_any_input() {
    let dir = tempfile::tempdir().unwrap();
    let frame = FrameConfig::default();

    let stereo = dir.path().join("stereo.wav");
    let left = tone_with_clicks(44_100, 8.0, 300.0);
    let frames: Vec<Vec<f64>> = left.iter().map(|&s| vec![s, -0.5 * s]).collect();
    write_pcm16(&stereo, 2, 44_100, &frames);
    let clip = ingest(&stereo, &frame).unwrap();
    assert_eq!(clip.len(), 64_000);
    assert_eq!(clip.sample_rate(), 16_000);
    // averaged channels: a quarter of the left amplitude
    let rms = clip.rms();
    assert!((rms - 0.25 * 0.4 / 2f64.sqrt()).abs() < 0.01, "{rms}");

    let short = dir.path().join("short.wav");
    mono_wav(&short, 16_000, 2.0, 440.0);
    let clip = ingest(&short, &frame).unwrap();
    assert_eq!(clip.len(), 64_000);
    assert!(clip.samples()[32_000..].iter().all(|&v| v == 0.0));
    assert!(clip.samples()[..32_000].iter().any(|&v| v != 0.0));

    let loud = dir.path().join("loud.wav");
    write_float(&loud, 16_000, &vec![3.0; 64_000]);
    assert_eq!(ingest(&loud, &frame).unwrap().peak(), 1.0);

    let exact = dir.path().join("exact.wav");
    let x = tone_with_clicks(16_000, 4.0, 440.0);
    write_float(&exact, 16_000, &x);
    let clip = ingest(&exact, &frame).unwrap();
    for (a, b) in clip.samples().iter().zip(&x) {
        assert_eq!(*a, *b as f32 as f64);
    }

    let a = encode_wav(&ingest(&stereo, &frame).unwrap()).unwrap();
    let b = encode_wav(&ingest(&stereo, &frame).unwrap()).unwrap();
    assert_eq!(a, b);

    let bogus = dir.path().join("bogus.wav");
    std::fs::write(&bogus, b"RIFF....not really").unwrap();
    match ingest(&bogus, &frame) {
        Err(Error::File { path, .. }) => assert_eq!(path, bogus),
        other => panic!("{other:?}"),
    }
}

#[test]
fn preprocess_is_idempotent_and_survives_bad_files() {
    let input = tempfile::tempdir().unwrap();
    let cache = tempfile::tempdir().unwrap();
    let frame = FrameConfig::default();
    mono_wav(&input.path().join("a.wav"), 16_000, 4.0, 220.0);
    mono_wav(&input.path().join("b.wav"), 22_050, 3.0, 330.0);
    std::fs::write(input.path().join("broken.wav"), b"garbage").unwrap();
    std::fs::write(input.path().join("notes.txt"), b"ignored").unwrap();

    let first = preprocess(input.path(), cache.path(), &frame, 0).unwrap();
    assert_eq!(first.computed, vec!["a", "b"]);
    assert_eq!(first.failed.len(), 1);
    assert!(first.failed[0].0.ends_with("broken.wav"));

    let second = preprocess(input.path(), cache.path(), &frame, 0).unwrap();
    assert!(second.computed.is_empty());
    assert_eq!(second.reused, vec!["a", "b"]);

    mono_wav(&input.path().join("a.wav"), 16_000, 4.0, 250.0);
    let third = preprocess(input.path(), cache.path(), &frame, 0).unwrap();
    assert_eq!(third.computed, vec!["a"]);

    let index = CacheIndex::load(cache.path()).unwrap();
    assert_eq!(index.entries.len(), 2);
    let rec = FeatureRecord::load(&cache.path().join("a.feat")).unwrap();
    assert_eq!(rec.controls.frames(), 400);
    assert_eq!(rec.mel.bands, 128);
    assert_eq!(rec.audio.len(), 64_000);
    let bytes = std::fs::read(cache.path().join("a.feat")).unwrap();
    assert_eq!(FeatureRecord::read_from(bytes.as_slice()).unwrap().to_bytes().unwrap(), bytes);
    assert_eq!(load_split(cache.path(), Split::Train).unwrap().len(), 2);
}

#[test]
fn train_then_synthesize_deterministically() {
    let input = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    let frame = FrameConfig::default();
    mono_wav(&input.path().join("clip.wav"), 16_000, 4.0, 440.0);
    let cache = work.path().join("cache");
    preprocess(input.path(), &cache, &frame, 0).unwrap();

    let ckpt = work.path().join("model.ckpt");
    let cfg = tiny_run(3);
    let reports = train_from_cache(&cfg, &cache, &ckpt).unwrap();
    assert_eq!(reports.len(), 3);
    let log = std::fs::read_to_string(log_path(&ckpt)).unwrap();
    let logged: Vec<LossReport> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(logged, reports);
    for r in &reports {
        assert!(r.identity_error() < 1e-9);
    }

    let (model, step) = load_model(&ckpt).unwrap();
    assert_eq!(step, 3);
    let guide = ingest(&input.path().join("clip.wav"), &frame).unwrap();
    let request = |z: ZMode| SynthesisRequest {
        source: Source::Audio(guide.clone()),
        z,
        seed: 5,
        sample_latent: false,
    };
    let a = synthesize(&model, &request(ZMode::Encoded)).unwrap();
    let b = synthesize(&model, &request(ZMode::Encoded)).unwrap();
    assert_eq!(encode_wav(&a).unwrap(), encode_wav(&b).unwrap());
    assert_eq!(a.len(), 64_000);
    assert!(a.peak() <= 1.0);

    let ctrl = resolve_controls(&model, &request(ZMode::Constant(7.0))).unwrap();
    assert!(ctrl.z.unwrap().iter().all(|&z| z == 3.0));
    let mut curve = vec![-9.0; 400];
    curve[10] = 0.5;
    let ctrl = resolve_controls(&model, &request(ZMode::Curve(curve))).unwrap();
    let z = ctrl.z.unwrap();
    assert_eq!((z[0], z[10]), (-3.0, 0.5));
    assert!(matches!(
        resolve_controls(&model, &request(ZMode::Curve(vec![0.0; 12]))),
        Err(Error::Request(_))
    ));

    let mut sampled = request(ZMode::Encoded);
    sampled.sample_latent = true;
    let s1 = resolve_controls(&model, &sampled).unwrap().z.unwrap();
    let s2 = resolve_controls(&model, &sampled).unwrap().z.unwrap();
    let mean = resolve_controls(&model, &request(ZMode::Encoded)).unwrap().z.unwrap();
    assert_eq!(s1, s2);
    assert_ne!(s1, mean);

    // a checkpoint whose tensors disagree with its config is a version error
    let mut ck = Checkpoint::load(&ckpt).unwrap();
    ck.model.hidden_units = 9;
    let bad = work.path().join("bad.ckpt");
    ck.save(&bad).unwrap();
    assert!(matches!(
        load_model(&bad),
        Err(Error::Core(ddsp_sfx_core::Error::Version(_)))
    ));
}

#[test]
fn corpus_evaluation_pairs_by_name() {
    let refs = tempfile::tempdir().unwrap();
    let gens = tempfile::tempdir().unwrap();
    let frame = FrameConfig::default();
    mono_wav(&refs.path().join("x.wav"), 16_000, 4.0, 440.0);
    mono_wav(&refs.path().join("y.wav"), 16_000, 4.0, 300.0);
    mono_wav(&refs.path().join("only_ref.wav"), 16_000, 1.0, 300.0);
    std::fs::copy(refs.path().join("x.wav"), gens.path().join("x.wav")).unwrap();
    mono_wav(&gens.path().join("y.wav"), 16_000, 4.0, 600.0);
    mono_wav(&gens.path().join("only_gen.wav"), 16_000, 1.0, 300.0);

    let report = evaluate_corpus(refs.path(), gens.path(), None, &frame).unwrap();
    assert_eq!(report.pairs.len(), 2);
    assert_eq!(report.skipped, vec!["only_gen", "only_ref"]);
    let x = &report.pairs[0];
    assert_eq!((x.name.as_str(), x.lsd, x.msstft), ("x", 0.0, 0.0));
    let y = &report.pairs[1];
    assert!(y.lsd > 0.0 && y.msstft > 0.0);
    assert!((report.lsd.mean - y.lsd / 2.0).abs() < 1e-12);
    assert!((report.msstft.mean - y.msstft / 2.0).abs() < 1e-12);
    assert!(report.frechet.is_none());

    let emb = tempfile::tempdir().unwrap();
    let files = EmbeddingFiles {
        reference: emb.path().join("ref.emb"),
        generated: emb.path().join("gen.emb"),
    };
    EmbeddingSet::new("r", 4, 1, vec![-1.0, 1.0, -1.0, 1.0]).unwrap().save(&files.reference).unwrap();
    EmbeddingSet::new("g", 4, 1, vec![0.0, 2.0, 0.0, 2.0]).unwrap().save(&files.generated).unwrap();
    let report = evaluate_corpus(refs.path(), gens.path(), Some(&files), &frame).unwrap();
    assert!((report.frechet.unwrap() - 1.0).abs() < 1e-8);
    assert!(report.to_key_value().contains("frechet="));

    let empty = tempfile::tempdir().unwrap();
    let report = evaluate_corpus(refs.path(), empty.path(), None, &frame).unwrap();
    assert!(report.pairs.is_empty());
    assert_eq!(report.skipped.len(), 3);
}
