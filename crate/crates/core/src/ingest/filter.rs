use serde::{Deserialize, Serialize};

use super::records::{RecordSet, SubmissionRecord};
use crate::error::{Error, Result};

/// Content filters applied before any analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterPolicy {
    pub drop_empty: bool,
    pub drop_nsfw: bool,
    pub drop_ads: bool,
    pub drop_bots: bool,
    /// Case-insensitive substrings of author names that mark automated accounts.
    pub bot_name_patterns: Vec<String>,
    /// Text bodies that count as deleted content.
    pub deleted_markers: Vec<String>,
    pub require_lang: Option<String>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            drop_empty: true,
            drop_nsfw: true,
            drop_ads: true,
            drop_bots: true,
            bot_name_patterns: vec!["bot".into()],
            deleted_markers: vec!["[deleted]".into(), "[removed]".into()],
            require_lang: Some("en".into()),
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.drop_empty && self.deleted_markers.is_empty() {
            return Err(Error::InvalidArgument(
                "drop_empty is on but deleted_markers is empty".into(),
            ));
        }
        if self.drop_bots && self.bot_name_patterns.is_empty() {
            return Err(Error::InvalidArgument(
                "drop_bots is on but bot_name_patterns is empty".into(),
            ));
        }
        Ok(())
    }

    fn is_blank(&self, part: &str) -> bool {
        let t = part.trim();
        t.is_empty() || self.deleted_markers.iter().any(|m| t == m)
    }

    /// First rule that removes `record`, in the fixed order
    /// empty → nsfw → ad → bot → lang.
    pub fn first_failing_rule(&self, record: &SubmissionRecord) -> Option<FilterRule> {
        if self.drop_empty && self.is_blank(&record.title_text) && self.is_blank(&record.self_text)
        {
            return Some(FilterRule::Empty);
        }
        if self.drop_nsfw && record.nsfw {
            return Some(FilterRule::Nsfw);
        }
        if self.drop_ads && record.is_ad {
            return Some(FilterRule::Ad);
        }
        if self.drop_bots {
            let author = record.author_name.to_lowercase();
            if self
                .bot_name_patterns
                .iter()
                .any(|p| author.contains(&p.to_lowercase()))
            {
                return Some(FilterRule::Bot);
            }
        }
        if let Some(lang) = &self.require_lang {
            if &record.lang_tag != lang {
                return Some(FilterRule::Lang);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    Empty,
    Nsfw,
    Ad,
    Bot,
    Lang,
}

/// Removal counts per rule; each removed record is attributed to exactly one rule.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub retained: usize,
    pub empty: usize,
    pub nsfw: usize,
    pub ad: usize,
    pub bot: usize,
    pub lang: usize,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.empty + self.nsfw + self.ad + self.bot + self.lang
    }

    fn count(&mut self, rule: FilterRule) {
        match rule {
            FilterRule::Empty => self.empty += 1,
            FilterRule::Nsfw => self.nsfw += 1,
            FilterRule::Ad => self.ad += 1,
            FilterRule::Bot => self.bot += 1,
            FilterRule::Lang => self.lang += 1,
        }
    }
}

pub fn filter_records(records: &RecordSet, policy: &FilterPolicy) -> Result<(RecordSet, FilterReport)> {
    policy.validate()?;
    let mut report = FilterReport {
        input: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        match policy.first_failing_rule(r) {
            Some(rule) => report.count(rule),
            None => kept.push(r.clone()),
        }
    }
    report.retained = kept.len();
    Ok((RecordSet::from_records(kept)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clean(id: &str) -> SubmissionRecord {
        let mut r = SubmissionRecord::new(id, 1_700_000_000);
        r.title_text = "What a morning".into();
        r.author_name = "alice".into();
        r.lang_tag = "en".into();
        r
    }

    fn run(records: Vec<SubmissionRecord>) -> (RecordSet, FilterReport) {
        filter_records(&RecordSet::from_records(records).unwrap(), &FilterPolicy::default()).unwrap()
    }

    #[test]
    fn removed_marker_counts_as_empty() {
        let mut r = clean("a");
        r.title_text = String::new();
        r.self_text = "[removed]".into();
        let (kept, report) = run(vec![r]);
        assert!(kept.is_empty());
        assert_eq!(report.empty, 1);
    }

    #[test]
    fn bot_author_substring() {
        let mut r = clean("a");
        r.author_name = "AutoModeratorBot".into();
        let (kept, report) = run(vec![r]);
        assert!(kept.is_empty());
        assert_eq!(report.bot, 1);
    }

    #[test]
    fn clean_record_is_retained() {
        let (kept, report) = run(vec![clean("a")]);
        assert_eq!(kept.len(), 1);
        assert_eq!(report.retained, 1);
        assert_eq!(report.removed(), 0);
    }

    #[test]
    fn first_rule_wins() {
        let mut r = clean("a");
        r.nsfw = true;
        r.is_ad = true;
        r.author_name = "spambot".into();
        r.lang_tag = "de".into();
        let (_, report) = run(vec![r]);
        assert_eq!((report.nsfw, report.ad, report.bot, report.lang), (1, 0, 0, 0));
    }

    #[test]
    fn language_mismatch() {
        let mut r = clean("a");
        r.lang_tag = "fr".into();
        let (_, report) = run(vec![r]);
        assert_eq!(report.lang, 1);
    }

    #[test]
    fn empty_pattern_list_is_rejected() {
        let policy = FilterPolicy {
            bot_name_patterns: vec![],
            ..Default::default()
        };
        assert!(filter_records(&RecordSet::default(), &policy).is_err());
    }

    fn arb_record() -> impl Strategy<Value = SubmissionRecord> {
        (
            0u32..1_000_000,
            prop::sample::select(vec!["", "  ", "[deleted]", "hello", "[removed]"]),
            prop::sample::select(vec!["", "body", "[removed]"]),
            any::<bool>(),
            any::<bool>(),
            prop::sample::select(vec!["alice", "SomeBot", "robotnik", "bob"]),
            prop::sample::select(vec!["en", "de", ""]),
        )
            .prop_map(|(n, title, body, nsfw, ad, author, lang)| {
                let mut r = SubmissionRecord::new(format!("id{n}"), 1_700_000_000);
                r.title_text = title.into();
                r.self_text = body.into();
                r.nsfw = nsfw;
                r.is_ad = ad;
                r.author_name = author.into();
                r.lang_tag = lang.into();
                r
            })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_subset(records in prop::collection::btree_map(0u32..5000, arb_record(), 0..40)) {
            let records: Vec<_> = records.into_iter().map(|(k, mut r)| { r.id = format!("r{k}"); r }).collect();
            let input = RecordSet::from_records(records).unwrap();
            let policy = FilterPolicy::default();
            let (once, report) = filter_records(&input, &policy).unwrap();
            let (twice, report2) = filter_records(&once, &policy).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(report2.removed(), 0);
            prop_assert_eq!(report.removed() + report.retained, report.input);
            let ids: std::collections::HashSet<_> = input.ids().into_iter().collect();
            prop_assert!(once.ids().iter().all(|id| ids.contains(id)));
        }
    }
}
