#pragma once

#include <set>
#include <string>
#include <vector>

#include "subjgen/errors.hpp"

namespace subjgen {

struct Email {
    std::string id;
    std::string raw_body;
    std::string raw_subject;
    std::vector<std::string> raw_references;  // up to 3 annotated subjects

    // populated by segment()
    std::vector<std::vector<std::string>> body_sentences;
    std::vector<std::string> subject_tokens;
    std::vector<std::vector<std::string>> reference_subjects;

    bool segmented() const { return !body_sentences.empty() || !subject_tokens.empty(); }
    std::vector<std::string> all_body_tokens() const;
    int body_word_count() const;
};

struct ProxyLabels {
    std::string email_id;
    std::vector<bool> labels;
    std::vector<int> positive_indices;  // ascending
};

struct CorpusStats {
    int docs = 0;
    double avg_doc_words = 0.0;
    double avg_subject_words = 0.0;
};

// Cleans the body, splits sentences and tokenizes body/subject/references.
Email segment(Email email);

// Keep/drop decision on a segmented email: >=3 sentences, >=25 body words
// (punctuation excluded), subject present and not a reply/forward, body
// without an embedded original-message marker.
bool filter_email(const Email& email);

// First occurrence survives; duplicate key is the normalized body text.
std::vector<Email> deduplicate(const std::vector<Email>& emails);

// Sentence j is positive when it shares a non-stopword token with the
// subject. When nothing overlaps, sentence 0 is forced positive.
ProxyLabels proxy_labels(const Email& email, const std::set<std::string>& stopwords);

CorpusStats corpus_stats(const std::vector<Email>& corpus);

// Record format: body lines, "@subject", one subject line, then optional
// "@ann0".."@ann2" marker lines each followed by one reference line.
std::vector<Email> import_marker_format(const std::string& text);

// JSON Lines with fields id, body, subject, ann0..ann2
std::vector<Email> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<Email>& emails, const std::string& path);

}  // namespace subjgen
