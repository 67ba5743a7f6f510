use std::collections::BTreeMap;

use yearsense::analysis::{compare_metrics, estimate_reference};
use yearsense::dumpio::{
    open_dump, read_activations, read_embeddings, read_similarity, write_activations, write_embeddings,
    write_hidden_states, write_similarity, ElementType, HiddenStateDump, PairSpec, NOTE_HOOK,
};
use yearsense::embeddings::{cosine_matrix, semantic_regression, EmbeddingSet};
use yearsense::matrix::similarity_to_distance;
use yearsense::neurons::identify_neurons;
use yearsense::probes::{probe_sweep, ProbeTrainConfig};
use yearsense::synthkit::{
    gen_hierarchical_code, gen_planted_neurons, gen_reference_similarity, mock_embedding, PlantedNeuronSpec,
    ReferenceSimilaritySpec,
};
use yearsense::{PairMode, PairSet, StimulusTemplate, TheoreticalMetric, YearRange};

#[test]
fn similarity_survives_csv_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen_reference_similarity(&ReferenceSimilaritySpec {
        range: YearRange::new(1925, 2124).unwrap(),
        reference: 2025,
        lambda: 1.0,
        sigma: 0.01,
        seed: 11,
    })
    .unwrap();
    let csv = dir.path().join("s.csv");
    let dump = dir.path().join("s.dump");
    s.write_csv(&csv).unwrap();
    write_similarity(&dump, &s).unwrap();
    let from_csv = yearsense::SimilarityMatrix::read_csv(&csv).unwrap();
    assert_eq!(from_csv.digest(), s.digest());
    let from_dump = read_similarity(&mut open_dump(&dump).unwrap()).unwrap();
    // the dump stores float32
    assert_eq!(from_dump.grid().missing_count(), 0);
    assert!((from_dump.get(2000, 2050).unwrap() - s.get(2000, 2050).unwrap()).abs() < 1e-6);

    let d = similarity_to_distance(&from_csv);
    let pairs = PairSet::enumerate(d.range(), PairMode::Full);
    let cmp = compare_metrics(&d, &pairs, &TheoreticalMetric::all(2025)).unwrap();
    assert_eq!(cmp.best.key(), "ref");
    assert!((estimate_reference(&from_csv, 5).unwrap().argmin - 2025).abs() <= 3);
}

#[test]
fn planted_neurons_through_activation_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = PlantedNeuronSpec::new(60, 6, 3.0, 0.99, 2);
    spec.n_layers = 3;
    let p = gen_planted_neurons(&spec).unwrap();
    let notes = BTreeMap::from([(NOTE_HOOK.to_string(), "mlp.act".to_string())]);
    let t_path = dir.path().join("t.dump");
    let n_path = dir.path().join("n.dump");
    let temporal: Vec<_> = p.layers.iter().map(|l| l.temporal.clone()).collect();
    let numerical: Vec<_> = p.layers.iter().map(|l| l.numerical.clone()).collect();
    write_activations(&t_path, "m", &temporal, notes.clone()).unwrap();
    write_activations(&n_path, "m", &numerical, notes).unwrap();

    let mut reader = open_dump(&t_path).unwrap();
    assert_eq!(reader.header().notes[NOTE_HOOK], "mlp.act");
    let t = read_activations(&mut reader).unwrap();
    let n = read_activations(&mut open_dump(&n_path).unwrap()).unwrap();
    assert_eq!(t, temporal);
    let layers: Vec<_> = t
        .into_iter()
        .zip(n)
        .map(|(a, b)| yearsense::neurons::LayerPair::new(a, b).unwrap())
        .collect();
    let sel = identify_neurons(&layers, Default::default()).unwrap();
    let mut found: Vec<(u32, usize)> = sel.selected.iter().map(|s| (s.layer, s.neuron)).collect();
    found.sort_unstable();
    assert_eq!(found, p.planted);
}

#[test]
fn probe_sweep_reads_layers_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let range = YearRange::new(1975, 2074).unwrap();
    let pairs = PairSet::enumerate(range, PairMode::Full);
    let indices = pairs.stratified_sample(1200, 5);
    let code = gen_hierarchical_code(&pairs, &indices, 2025, 3, 12, 0.01, 5).unwrap();
    let path = dir.path().join("h.dump");
    let spec = PairSpec {
        range,
        mode: PairMode::Full,
        indices,
    };
    write_hidden_states(&path, "m", spec, &code.layers, ElementType::Float16).unwrap();
    let mut source = HiddenStateDump::new(open_dump(&path).unwrap()).unwrap();
    let config = ProbeTrainConfig {
        epochs: 60,
        ..Default::default()
    };
    let report = probe_sweep(&mut source, &[0, 2, 7], &pairs, &[TheoreticalMetric::LogLinear], &config).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.gaps.len(), 1);
    assert_eq!(report.gaps[0].layer, 7);
    assert!(report.rows[0].score.adjusted_r2 > 0.95);
}

#[test]
fn embeddings_roundtrip_and_regress() {
    let dir = tempfile::tempdir().unwrap();
    let range = YearRange::new(1900, 2000).unwrap();
    let vectors: Vec<Vec<f64>> = range.years().map(|y| vec![f64::from(y), 1.0, 0.5]).collect();
    let set = EmbeddingSet::new("e", StimulusTemplate::default(), range, vectors).unwrap();
    let path = dir.path().join("e.dump");
    write_embeddings(&path, &set).unwrap();
    let back = read_embeddings(&mut open_dump(&path).unwrap()).unwrap();
    assert_eq!(back.template, set.template);
    assert_eq!(back.range, range);
    assert!((back.vectors[3][0] - set.vectors[3][0]).abs() < 1e-3);

    let mock: Vec<Vec<f64>> = range.years().map(|y| mock_embedding(y, 2025, 0.5)).collect();
    let mock_set = EmbeddingSet::new("mock", StimulusTemplate::default(), range, mock).unwrap();
    let s = cosine_matrix(&mock_set);
    let pairs = PairSet::enumerate(range, PairMode::Upper);
    let cmp = semantic_regression(&s, &pairs, &TheoreticalMetric::all(2025)).unwrap();
    assert_eq!(cmp.fits.len(), 3);
}
