use text_smoothing::mlm::archive::{Archive, ArchiveTensor};
use text_smoothing::mlm::micro;
use text_smoothing::mlm::tokenizer::WordLevelTokenizer;
use text_smoothing::mlm::EncoderConfig;
use text_smoothing::{BackendConfig, Error, MlmBackend, SmoothingRequest, TextInput};

const WORD_EMBEDDINGS: &str = "bert.embeddings.word_embeddings.weight";

fn no_dropout() -> BackendConfig {
    BackendConfig {
        dropout_active: false,
        ..BackendConfig::micro()
    }
}

fn micro_with(archive: &Archive, cfg: &BackendConfig) -> MlmBackend {
    MlmBackend::from_archive(
        "fixture",
        Box::new(micro::tokenizer().unwrap()),
        archive,
        cfg,
    )
    .unwrap()
}

/// Four-token vocabulary `[CLS] [SEP] a b` with hidden size 2.
fn tiny_config() -> EncoderConfig {
    EncoderConfig {
        vocab_size: 4,
        hidden_size: 2,
        num_hidden_layers: 1,
        num_attention_heads: 2,
        intermediate_size: 4,
        max_position_embeddings: 8,
        type_vocab_size: 2,
        layer_norm_eps: 1e-12,
        hidden_dropout_prob: 0.1,
        attention_probs_dropout_prob: 0.1,
        hidden_act: None,
    }
}

fn tiny_backend(archive: &Archive) -> MlmBackend {
    let tok =
        WordLevelTokenizer::new(["[CLS]", "[SEP]", "a", "b"].map(String::from).to_vec()).unwrap();
    MlmBackend::from_archive("tiny", Box::new(tok), archive, &BackendConfig::micro()).unwrap()
}

fn sentences() -> Vec<String> {
    let subjects = [
        "the movie",
        "this shirt",
        "my food",
        "the story",
        "that book",
    ];
    let verbs = ["was", "is", "looks", "feels", "tastes"];
    let adjectives = ["great", "awful", "average", "boring", "fresh"];
    let mut out = Vec::new();
    for (i, s) in subjects.iter().enumerate() {
        for (j, v) in verbs.iter().enumerate() {
            out.push(format!(
                "{s} {v} {} .",
                adjectives[(i + j) % adjectives.len()]
            ));
            out.push(format!(
                "{s} {v} very {} !",
                adjectives[(i * 2 + j) % adjectives.len()]
            ));
        }
    }
    out
}

#[test]
fn encode_conventions() {
    let b = MlmBackend::micro().unwrap();
    assert!(matches!(b.encode(&"".into()), Err(Error::EmptyInput)));
    let single = b.encode(&"the movie was great .".into()).unwrap();
    assert!(single.segment_ids.iter().all(|&s| s == 0));
    assert_eq!(single.len(), single.position_ids.len());
    assert_eq!(single.len(), single.special_mask.len());
    assert!(single.special_mask[0] && *single.special_mask.last().unwrap());

    let pair = b
        .encode(&TextInput::Pair(
            "the movie was great".into(),
            "i love it".into(),
        ))
        .unwrap();
    let switches = pair.segment_ids.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(switches, 1);
    assert_eq!(pair.segment_ids.first(), Some(&0));
    assert_eq!(pair.segment_ids.last(), Some(&1));
    assert_eq!(b.encode(&"the movie was great .".into()).unwrap(), single);
}

#[test]
fn zero_weights_give_zero_hidden_and_uniform_rows() {
    let b = micro_with(
        &micro::zero_archive(&micro::config()),
        &BackendConfig::micro(),
    );
    let enc = b.encode(&"the shirt is fine".into()).unwrap();
    let h = b.forward_hidden(&enc, 3).unwrap();
    assert!(h.as_flat().iter().all(|&x| x == 0.0));
    let s = b
        .smooth(&SmoothingRequest::new("the shirt is fine", 3))
        .unwrap();
    for row in s.rows() {
        assert!(row.iter().all(|&p| (p - 1.0 / 64.0).abs() < 1e-12));
    }
}

#[test]
fn dropout_draws_follow_the_seed() {
    let b = MlmBackend::micro().unwrap();
    let enc = b
        .encode(&"the quality of this shirt is average .".into())
        .unwrap();
    let a = b.forward_hidden(&enc, 1).unwrap();
    assert_eq!(a, b.forward_hidden(&enc, 1).unwrap());
    assert_ne!(a, b.forward_hidden(&enc, 2).unwrap());

    let req = SmoothingRequest::new("the quality of this shirt is average .", 1);
    let s1 = b.smooth(&req).unwrap();
    assert_eq!(s1, b.smooth(&req).unwrap());
    assert_ne!(
        s1,
        b.smooth(&SmoothingRequest::new(req.text.clone(), 2))
            .unwrap()
    );

    let off = MlmBackend::load(&no_dropout()).unwrap();
    assert_eq!(
        off.forward_hidden(&enc, 1).unwrap(),
        off.forward_hidden(&enc, 99).unwrap()
    );
}

#[test]
fn uniform_rows_interpolate_by_hand() {
    let b = tiny_backend(&micro::zero_archive(&tiny_config()));
    let s = b
        .smooth_and_interpolate(&SmoothingRequest::new("a", 0), 0.1)
        .unwrap();
    assert_eq!(s.len(), 3);
    let expected = [0.225, 0.225, 0.325, 0.225];
    for (got, want) in s.row(1).iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{:?}", s.row(1));
    }
    assert_eq!(s.row(0), &[1.0, 0.0, 0.0, 0.0]);
    assert_eq!(s.lambda_used(), Some(0.1));
}

#[test]
fn interpolation_endpoint_and_range() {
    let b = MlmBackend::micro().unwrap();
    let req = SmoothingRequest::new("i love this food", 5);
    let enc = b.encode(&req.text).unwrap();
    let s = b.smooth_and_interpolate(&req, 1.0).unwrap();
    for (i, &id) in enc.token_ids.iter().enumerate() {
        let row = s.row(i);
        assert_eq!(row[id as usize], 1.0);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
    }
    for bad in [-0.1, 1.5, f64::NAN] {
        assert!(matches!(
            b.smooth_and_interpolate(&req, bad),
            Err(Error::LambdaOutOfRange(_))
        ));
    }
}

#[test]
fn embedding_table_is_returned_verbatim() {
    let mut archive = micro::zero_archive(&tiny_config());
    let table = vec![0.5f32, -1.0, 2.0, 0.25, -0.75, 1.5, 3.0, -2.0];
    archive.tensors.insert(
        WORD_EMBEDDINGS.into(),
        ArchiveTensor {
            shape: vec![4, 2],
            data: table.clone(),
        },
    );
    let b = tiny_backend(&archive);
    let e = b.embedding_matrix().unwrap();
    assert_eq!((e.vocab_size(), e.embed_size()), (4, 2));
    let want: Vec<f64> = table.iter().map(|&x| x as f64).collect();
    assert_eq!(e.as_flat(), want.as_slice());

    let micro = MlmBackend::micro().unwrap();
    let e = micro.embedding_matrix().unwrap();
    let d = micro.descriptor();
    assert_eq!(
        (e.vocab_size(), e.embed_size()),
        (d.vocab_size, d.embed_size)
    );
}

/// Dense `softmax(h W^T / t)` computed with plain loops.
fn oracle(hidden: &[f64], rows: usize, w: &[f64], vocab: usize, dim: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * vocab);
    for r in 0..rows {
        let logits: Vec<f64> = (0..vocab)
            .map(|v| {
                (0..dim)
                    .map(|k| hidden[r * dim + k] * w[v * dim + k])
                    .sum::<f64>()
                    / t
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        out.extend(logits.iter().map(|l| (l - max).exp() / z));
    }
    out
}

#[test]
fn smoothing_matches_dense_oracle() {
    for t in [1.0, 2.0] {
        let b = MlmBackend::load(&BackendConfig {
            temperature: t,
            ..no_dropout()
        })
        .unwrap();
        assert!(!b.has_head_transform());
        let w = b.embedding_matrix().unwrap();
        for s in sentences().iter().take(10) {
            let enc = b.encode(&s.as_str().into()).unwrap();
            let h = b.forward_hidden(&enc, 0).unwrap();
            let want = oracle(
                h.as_flat(),
                h.rows(),
                w.as_flat(),
                w.vocab_size(),
                w.embed_size(),
                t,
            );
            let got = b.smooth(&SmoothingRequest::new(s.as_str(), 0)).unwrap();
            for (g, o) in got.as_flat().iter().zip(&want) {
                assert!((g - o).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn one_forward_pass_and_no_mutation() {
    let b = MlmBackend::micro().unwrap();
    let req = SmoothingRequest::new("the movie was really boring", 8);
    let before = b.encode(&req.text).unwrap();
    let snapshot = req.clone();
    let calls = b.forward_calls();
    b.smooth(&req).unwrap();
    assert_eq!(b.forward_calls(), calls + 1);
    b.smooth_and_interpolate(&req, 0.1).unwrap();
    assert_eq!(b.forward_calls(), calls + 2);
    assert_eq!(req, snapshot);
    let after = b.encode(&req.text).unwrap();
    assert_eq!(before.token_ids, after.token_ids);
    let mask = b.tokenizer().special_ids().mask.unwrap();
    assert!(!after.token_ids.contains(&mask));
}

#[test]
fn cached_draw_is_reused() {
    let b = MlmBackend::micro().unwrap();
    let enc = b.encode(&"my fruit is fresh".into()).unwrap();
    let first = b.smooth_encoded(&enc, 4, false).unwrap();
    let calls = b.forward_calls();
    let again = b.smooth_encoded(&enc, 5, false).unwrap();
    assert_eq!(b.forward_calls(), calls);
    assert_eq!(first, again);
    b.smooth_encoded(&enc, 5, true).unwrap();
    assert_eq!(b.forward_calls(), calls + 1);
}

#[test]
fn length_limit() {
    let b = MlmBackend::load(&BackendConfig {
        max_seq_len: Some(5),
        ..BackendConfig::micro()
    })
    .unwrap();
    let long = SmoothingRequest::new("the movie was very good and fun", 0);
    assert!(matches!(
        b.smooth(&long),
        Err(Error::SequenceTooLong { max: 5, .. })
    ));
    let t = MlmBackend::load(&BackendConfig {
        max_seq_len: Some(5),
        truncate: true,
        ..BackendConfig::micro()
    })
    .unwrap();
    assert_eq!(t.smooth(&long).unwrap().len(), 5);
}

#[test]
fn missing_checkpoint_is_a_backend_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = MlmBackend::load(&BackendConfig::pretrained(dir.path().join("nope"))).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable(_)));
    assert_eq!(err.exit_code(), 4);
    let cfg =
        BackendConfig::from_toml_str("kind = \"pretrained\"\ncheckpoint_path = \"/nonexistent\"\n")
            .unwrap();
    assert!(matches!(
        MlmBackend::load(&cfg),
        Err(Error::BackendUnavailable(_))
    ));
    assert!(matches!(
        BackendConfig::from_toml_str("temprature = 1.0"),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn concurrent_calls_match_sequential() {
    let b = MlmBackend::micro().unwrap();
    let texts = sentences();
    let sequential: Vec<_> = texts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            b.smooth(&SmoothingRequest::new(s.as_str(), i as u64))
                .unwrap()
        })
        .collect();
    let calls = b.forward_calls();
    let parallel: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let b = &b;
                scope.spawn(move || {
                    b.smooth(&SmoothingRequest::new(s.as_str(), i as u64))
                        .unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(parallel, sequential);
    assert_eq!(b.forward_calls(), calls + texts.len());
}

#[test]
fn bundled_weights_round_trip() {
    let archive = micro::bundled_archive().unwrap();
    assert_eq!(archive.config, micro::config());
    assert_eq!(
        Archive::read(&archive.to_bytes().unwrap()).unwrap(),
        archive
    );
}

/// Writes the micro weights in Hugging Face layout (`config.json`,
/// `model.safetensors`, `vocab.txt`), optionally with an MLM head transform.
fn write_checkpoint(dir: &std::path::Path, head: bool) {
    use candle_core::{Device, Tensor};
    let archive = micro::bundled_archive().unwrap();
    let h = archive.config.hidden_size;
    let mut tensors = std::collections::HashMap::new();
    for (name, t) in &archive.tensors {
        let name = name
            .strip_prefix("bert.")
            .unwrap()
            .replace("LayerNorm.weight", "LayerNorm.gamma");
        let name = name.replace("LayerNorm.bias", "LayerNorm.beta");
        tensors.insert(
            name,
            Tensor::from_slice(&t.data, t.shape.as_slice(), &Device::Cpu).unwrap(),
        );
    }
    if head {
        let eye: Vec<f32> = (0..h * h)
            .map(|k| if k / h == k % h { 1.0 } else { 0.0 })
            .collect();
        let put = |m: &mut std::collections::HashMap<String, Tensor>,
                   n: &str,
                   d: Vec<f32>,
                   s: &[usize]| {
            m.insert(n.to_string(), Tensor::from_vec(d, s, &Device::Cpu).unwrap());
        };
        put(
            &mut tensors,
            "cls.predictions.transform.dense.weight",
            eye,
            &[h, h],
        );
        put(
            &mut tensors,
            "cls.predictions.transform.dense.bias",
            vec![0.0; h],
            &[h],
        );
        put(
            &mut tensors,
            "cls.predictions.transform.LayerNorm.weight",
            vec![1.0; h],
            &[h],
        );
        put(
            &mut tensors,
            "cls.predictions.transform.LayerNorm.bias",
            vec![0.0; h],
            &[h],
        );
        put(
            &mut tensors,
            "cls.predictions.bias",
            vec![0.5; archive.config.vocab_size],
            &[archive.config.vocab_size],
        );
    }
    candle_core::safetensors::save(&tensors, dir.join("model.safetensors")).unwrap();
    std::fs::write(
        dir.join("config.json"),
        serde_json::to_vec(&archive.config).unwrap(),
    )
    .unwrap();
    std::fs::write(dir.join("vocab.txt"), micro::VOCAB).unwrap();
}

#[test]
fn checkpoint_directory_loads_like_the_micro_backend() {
    let dir = tempfile::tempdir().unwrap();
    write_checkpoint(dir.path(), false);
    let off = |cfg: BackendConfig| BackendConfig {
        dropout_active: false,
        ..cfg
    };
    let pre = MlmBackend::load(&off(BackendConfig::pretrained(dir.path()))).unwrap();
    let micro = MlmBackend::load(&no_dropout()).unwrap();
    assert_eq!(
        pre.embedding_matrix().unwrap().vocab_size(),
        pre.tokenizer().vocab_size()
    );
    assert!(!pre.has_head_transform());

    let text = "the quality of this shirt is average .";
    let a = pre.encode(&text.into()).unwrap();
    let b = micro.encode(&text.into()).unwrap();
    assert_eq!(a.token_ids, b.token_ids);
    assert_eq!(a.special_mask, b.special_mask);
    let sa = pre.smooth(&SmoothingRequest::new(text, 0)).unwrap();
    let sb = micro.smooth(&SmoothingRequest::new(text, 0)).unwrap();
    for (x, y) in sa.as_flat().iter().zip(sb.as_flat()) {
        assert!((x - y).abs() < 1e-4);
    }

    let pair = pre
        .encode(&TextInput::Pair(
            "the movie was good".into(),
            "i love it".into(),
        ))
        .unwrap();
    assert_eq!(
        pair.segment_ids.windows(2).filter(|w| w[0] != w[1]).count(),
        1
    );

    let head = tempfile::tempdir().unwrap();
    write_checkpoint(head.path(), true);
    let with_head = MlmBackend::load(&off(BackendConfig::pretrained(head.path()))).unwrap();
    assert!(with_head.has_head_transform());
    assert_eq!(with_head.output_bias().unwrap().unwrap().len(), 64);
    for row in with_head
        .smooth(&SmoothingRequest::new(text, 0))
        .unwrap()
        .rows()
    {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
