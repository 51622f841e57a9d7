use plr_core::debias::{
    debias_run, log_odds_score, map_score, penalty_map, relative_ratio, CaptionPairRecord,
    FilterConfig, HallucinationType, Side, VocabStats,
};
use plr_core::format::{
    canonicalize_evidence, evidence_format_reward, lenient_evidence, parse_response,
    think_format_reward, Evidence, PlrResponse,
};
use plr_core::gateway::Judgment;
use plr_core::margin::auc;
use plr_core::metrics::{rouge_l, temporal_iou};
use plr_core::policy::{
    group_advantages, grpo_step_objective, orpo_loss, orpo_or_gradient, GrpoStepInputs,
    PreferenceLogProbs, RewardGroup,
};
use plr_core::reward::anti_hallucination_reward;
use plr_core::scheduler::{run_step, Mode, StagePlan};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,7}"
}

fn desc() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..6).prop_map(|w| w.join(" "))
}

fn evidence() -> impl Strategy<Value = Evidence> {
    (0u32..2000, 0u32..400, desc())
        .prop_map(|(s, len, d)| Evidence::new(s as f64 / 10.0, (s + len) as f64 / 10.0, d).unwrap())
}

fn plain() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 ,.!?\n]{0,20}"
}

fn response() -> impl Strategy<Value = PlrResponse> {
    (
        prop::collection::vec((plain(), evidence()), 0..5),
        plain(),
        "[A-Za-z0-9 ,.]{0,20}",
    )
        .prop_map(|(parts, tail, answer_text)| {
            let mut think_text = String::new();
            let mut evidence = Vec::new();
            for (text, e) in parts {
                think_text.push_str(&text);
                think_text.push_str(&canonicalize_evidence(&e));
                evidence.push(e);
            }
            think_text.push_str(&tail);
            PlrResponse {
                think_text,
                answer_text,
                evidence,
            }
        })
}

fn interval() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..100.0, 0.0f64..50.0).prop_map(|(s, l)| (s, s + l))
}

fn judgment() -> impl Strategy<Value = Judgment> {
    (0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("non-zero mass", |(y, n)| y + n > 0.0)
        .prop_map(|(y, n)| Judgment::new(y, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn response_round_trips(r in response()) {
        let text = r.to_text();
        prop_assert_eq!(parse_response(&text).unwrap(), r.clone());
        prop_assert_eq!(think_format_reward(&text), 1);
        prop_assert_eq!(evidence_format_reward(&text, false), u8::from(!r.evidence.is_empty()));
    }

    #[test]
    fn canonical_tag_round_trips(e in evidence()) {
        let text = format!("<think>{}</think><answer>A</answer>", canonicalize_evidence(&e));
        prop_assert_eq!(parse_response(&text).unwrap().evidence, vec![e]);
    }

    #[test]
    fn parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_response(&text);
        let _ = think_format_reward(&text);
        let fmt = evidence_format_reward(&text, false);
        let found = lenient_evidence(&text);
        if fmt == 1 {
            prop_assert!(found.iter().all(|e| e.start_s <= e.end_s));
        }
    }

    #[test]
    fn parser_is_total_near_grammar(
        pieces in prop::collection::vec(
            prop::sample::select(vec![
                "<think>", "</think>", "<answer>", "</answer>", "<start=", "\"1.5\"", ",end=",
                "2", ",desc=\"", "a man", "\"", ">", " ", "<", "=", ",", ".", "start", "desc",
            ]),
            0..30,
        )
    ) {
        let text: String = pieces.concat();
        let _ = parse_response(&text);
        let _ = think_format_reward(&text);
        let _ = evidence_format_reward(&text, true);
        let _ = lenient_evidence(&text);
    }

    #[test]
    fn iou_symmetric_and_bounded(a in interval(), b in interval()) {
        let ab = temporal_iou(a, b).unwrap();
        prop_assert_eq!(ab, temporal_iou(b, a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(temporal_iou(a, a).unwrap(), 1.0);
    }

    #[test]
    fn rouge_symmetric_and_bounded(a in desc(), b in desc()) {
        let ab = rouge_l(&a, &b);
        prop_assert_eq!(ab, rouge_l(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(rouge_l(&a, &a), 1.0);
    }

    #[test]
    fn hallucination_reward_permutation_invariant(
        items in prop::collection::vec((evidence(), judgment()), 1..8),
        seed in any::<u64>(),
    ) {
        let (ev, js): (Vec<_>, Vec<_>) = items.iter().cloned().unzip();
        let base = anti_hallucination_reward(&ev, &js).unwrap();
        let mut idx: Vec<usize> = (0..items.len()).collect();
        let mut s = seed;
        for i in (1..idx.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (s >> 33) as usize % (i + 1));
        }
        let ev2: Vec<_> = idx.iter().map(|&i| ev[i].clone()).collect();
        let js2: Vec<_> = idx.iter().map(|&i| js[i]).collect();
        prop_assert_eq!(base, anti_hallucination_reward(&ev2, &js2).unwrap());
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn duplicated_evidence_never_helps(
        items in prop::collection::vec((evidence(), judgment()), 1..8),
        pick in any::<prop::sample::Index>(),
    ) {
        let (mut ev, mut js): (Vec<_>, Vec<_>) = items.into_iter().unzip();
        let base = anti_hallucination_reward(&ev, &js).unwrap();
        let i = pick.index(ev.len());
        ev.push(ev[i].clone());
        js.push(js[i]);
        prop_assert!(anti_hallucination_reward(&ev, &js).unwrap() <= base);
    }

    #[test]
    fn advantages_are_normalized(rewards in prop::collection::vec(-5.0f64..5.0, 2..16)) {
        let adv = group_advantages(&RewardGroup::new(rewards.clone()).unwrap());
        prop_assert_eq!(adv.len(), rewards.len());
        if rewards.iter().all(|&r| r == rewards[0]) {
            prop_assert!(adv.iter().all(|&a| a == 0.0));
        } else {
            let k = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / k;
            let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k).sqrt();
            prop_assert!(mean.abs() < 1e-12);
            prop_assert!((std - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn clipped_objective_never_exceeds_unclipped(
        ratio in 0.01f64..5.0, adv in -3.0f64..3.0, kl in 0.0f64..1.0,
    ) {
        let inp = GrpoStepInputs::new(ratio, adv, kl);
        prop_assert!(grpo_step_objective(&inp) <= ratio * adv - inp.beta * kl + 1e-15);
    }

    #[test]
    fn orpo_prefers_likely_chosen(w in -8.0f64..-0.05, l in -8.0f64..-0.05) {
        let p = PreferenceLogProbs { logp_chosen: w, logp_rejected: l, lambda: 0.5 };
        let (gw, gl) = orpo_or_gradient(&p);
        prop_assert!(gw < 0.0 && gl > 0.0);
        let h = 1e-6;
        let at = |w: f64, l: f64| orpo_loss(&PreferenceLogProbs { logp_chosen: w, logp_rejected: l, lambda: 0.5 }).l_or;
        let fw = (at(w + h, l) - at(w - h, l)) / (2.0 * h);
        let fl = (at(w, l + h) - at(w, l - h)) / (2.0 * h);
        prop_assert!(((fw - gw) / gw).abs() < 1e-4, "{} vs {}", fw, gw);
        prop_assert!(((fl - gl) / gl).abs() < 1e-4, "{} vs {}", fl, gl);
        prop_assert!(orpo_loss(&p).l_or >= 0.0);
    }

    #[test]
    fn log_odds_antisymmetric(
        pos in prop::collection::vec(desc(), 1..10),
        neg in prop::collection::vec(desc(), 1..10),
    ) {
        let stats = VocabStats::from_corpora(&pos, &neg);
        let swapped = stats.swapped();
        for w in stats.vocabulary() {
            prop_assert_eq!(log_odds_score(w, &stats), -log_odds_score(w, &swapped));
        }
        prop_assert_eq!(map_score(&stats).unwrap(), map_score(&swapped).unwrap());
    }

    #[test]
    fn penalties_peak_at_one(
        pos in prop::collection::vec(desc(), 1..10),
        neg in prop::collection::vec(desc(), 1..10),
        top_n in 1usize..40,
    ) {
        let stats = VocabStats::from_corpora(&pos, &neg);
        for side in [Side::Positive, Side::Negative] {
            let p = penalty_map(&relative_ratio(&stats, side), top_n).unwrap();
            prop_assert!(p.len() <= top_n);
            prop_assert_eq!(p.values().cloned().fold(f64::MIN, f64::max), 1.0);
            prop_assert!(p.values().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn overlap_never_slower(
        a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.0f64..100.0, d in 0.0f64..100.0,
    ) {
        let plan = StagePlan::new(a, b, c, d).unwrap();
        let s = run_step(&plan, Mode::Serial);
        let o = run_step(&plan, Mode::Overlapped);
        prop_assert!(o.total <= s.total);
        prop_assert_eq!(o.total, plan.predicted_total(Mode::Overlapped));
        prop_assert_eq!(s.total, plan.predicted_total(Mode::Serial));
        s.check_dependencies().unwrap();
        o.check_dependencies().unwrap();
    }

    #[test]
    fn auc_invariant_under_monotone_maps(
        pos in prop::collection::vec(0.0f64..1.0, 1..20),
        neg in prop::collection::vec(0.0f64..1.0, 1..20),
    ) {
        let base = auc(&pos, &neg);
        let f = |xs: &[f64]| xs.iter().map(|x| x * x * x + 2.0 * x).collect::<Vec<_>>();
        prop_assert_eq!(base, auc(&f(&pos), &f(&neg)));
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!((base + auc(&neg, &pos) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn debias_is_deterministic_and_bounded(
        pairs in prop::collection::vec((desc(), desc()), 1..60),
        pct in 0.01f64..0.5,
        n_iter in 0usize..6,
    ) {
        let data: Vec<CaptionPairRecord> = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (p, n))| CaptionPairRecord {
                id: format!("p{i:03}"),
                video_id: "v".into(),
                start_s: 0.0,
                end_s: 1.0,
                positive: p,
                negative: n,
                hallucination_type: HallucinationType::ActionSubstitution,
            })
            .collect();
        let cfg = FilterConfig { n_iter, pct_per_iter: pct, ..FilterConfig::default() };
        let a = debias_run(&data, &cfg).unwrap();
        let b = debias_run(&data, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let report = a.1;
        prop_assert_eq!(report.iterations.len(), n_iter);
        let mut prev = (data.len(), data.len());
        let mut seen_pos = std::collections::HashSet::new();
        for it in &report.iterations {
            let cap_p = (pct * prev.0 as f64 - 1e-9).ceil() as usize;
            let cap_n = (pct * prev.1 as f64 - 1e-9).ceil() as usize;
            prop_assert!(it.removed_pos_ids.len() <= cap_p);
            prop_assert!(it.removed_neg_ids.len() <= cap_n);
            for id in &it.removed_pos_ids {
                prop_assert!(seen_pos.insert(id.clone()));
            }
            prev = (it.remaining_pos, it.remaining_neg);
        }
    }
}
