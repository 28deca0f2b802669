#![no_main]

use libfuzzer_sys::fuzz_target;

use segdist::io::table::{bind_for_eval, parse_str, write_table};
use segdist::EvalConfig;

// Parsing must never panic, parsed tables must be internally consistent,
// and anything that binds against a config must survive a write/reparse
// cycle bit for bit.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(raw) = parse_str(text) else {
        return;
    };

    let n = raw.positions.len();
    assert_eq!(raw.gt.len(), n);
    if let Some(hard) = &raw.hard {
        assert_eq!(hard.len(), n);
    }
    for model in &raw.models {
        if let Some(pred) = &model.pred {
            assert_eq!(pred.len(), n);
        }
        if let Some((width, values)) = &model.probs {
            assert_eq!(values.len(), n * width);
        }
    }

    let config = EvalConfig::from_parts(
        (0..4).map(|c| format!("c{c}")).collect(),
        vec![1.0; 4],
    )
    .unwrap();
    let Ok((cloud, preds)) = bind_for_eval(&raw, &config) else {
        return;
    };
    let mut buffer = Vec::new();
    write_table(&mut buffer, &cloud, &preds, raw.hard.as_deref()).unwrap();
    let text = String::from_utf8(buffer).unwrap();
    let reparsed = parse_str(&text).expect("writer output must parse");
    assert_eq!(reparsed.positions, cloud.positions());
    assert_eq!(reparsed.hard, raw.hard);
    let (cloud2, preds2) = bind_for_eval(&reparsed, &config).expect("writer output must bind");
    assert_eq!(cloud2.gt_labels(), cloud.gt_labels());
    for (a, b) in preds.iter().zip(&preds2) {
        assert_eq!(a.pred_labels, b.pred_labels);
    }
});
