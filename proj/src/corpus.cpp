#include "subjgen/corpus.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "subjgen/text.hpp"

namespace subjgen {

std::vector<std::string> Email::all_body_tokens() const {
    std::vector<std::string> out;
    for (const auto& s : body_sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
}

int Email::body_word_count() const {
    int n = 0;
    for (const auto& s : body_sentences) n += count_words(s);
    return n;
}

Email segment(Email email) {
    if (trim(email.raw_body).empty())
        throw contract_error("segment: email " + email.id + " has empty body");
    email.body_sentences.clear();
    for (const std::string& sent : split_sentences(clean_body(email.raw_body))) {
        std::vector<std::string> toks = tokenize(sent);
        if (!toks.empty()) email.body_sentences.push_back(std::move(toks));
    }
    email.subject_tokens = tokenize(email.raw_subject);
    email.reference_subjects.clear();
    for (const std::string& r : email.raw_references) {
        std::vector<std::string> toks = tokenize(r);
        if (!toks.empty()) email.reference_subjects.push_back(std::move(toks));
    }
    return email;
}

bool filter_email(const Email& email) {
    if (static_cast<int>(email.body_sentences.size()) < 3) return false;
    if (email.body_word_count() < 25) return false;
    if (email.subject_tokens.empty()) return false;
    std::string subj = lowercase(trim(email.raw_subject));
    if (subj.rfind("re:", 0) == 0 || subj.rfind("fw:", 0) == 0) return false;
    if (email.raw_body.find("Original Message") != std::string::npos) return false;
    return true;
}

std::vector<Email> deduplicate(const std::vector<Email>& emails) {
    std::vector<Email> out;
    std::set<std::string> seen;
    for (const Email& e : emails) {
        std::string key = normalize_whitespace(e.raw_body);
        if (seen.insert(key).second) out.push_back(e);
    }
    return out;
}

ProxyLabels proxy_labels(const Email& email, const std::set<std::string>& stopwords) {
    ProxyLabels out;
    out.email_id = email.id;
    std::set<std::string> subject_words;
    for (const std::string& t : email.subject_tokens)
        if (!is_punct_token(t) && !stopwords.count(t)) subject_words.insert(t);
    for (size_t j = 0; j < email.body_sentences.size(); ++j) {
        bool pos = false;
        for (const std::string& t : email.body_sentences[j])
            if (subject_words.count(t)) {
                pos = true;
                break;
            }
        out.labels.push_back(pos);
        if (pos) out.positive_indices.push_back(static_cast<int>(j));
    }
    if (out.positive_indices.empty() && !out.labels.empty()) {
        out.labels[0] = true;
        out.positive_indices.push_back(0);
    }
    return out;
}

CorpusStats corpus_stats(const std::vector<Email>& corpus) {
    if (corpus.empty()) throw contract_error("corpus_stats: empty corpus");
    CorpusStats s;
    s.docs = static_cast<int>(corpus.size());
    double words = 0.0, subj = 0.0;
    for (const Email& e : corpus) {
        words += e.body_word_count();
        subj += count_words(e.subject_tokens);
    }
    s.avg_doc_words = words / s.docs;
    s.avg_subject_words = subj / s.docs;
    return s;
}

std::vector<Email> import_marker_format(const std::string& text) {
    std::vector<std::string> lines;
    {
        std::string line;
        std::istringstream in(text);
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
    }
    std::vector<Email> out;
    size_t i = 0;
    int record = 0;
    while (i < lines.size()) {
        // skip blank separation between records
        while (i < lines.size() && trim(lines[i]).empty()) ++i;
        if (i >= lines.size()) break;
        ++record;
        std::vector<std::string> body;
        bool found_subject = false;
        while (i < lines.size()) {
            if (trim(lines[i]) == "@subject") {
                found_subject = true;
                ++i;
                break;
            }
            body.push_back(lines[i]);
            ++i;
        }
        if (!found_subject)
            throw format_error("marker import: record " + std::to_string(record) +
                               " has no @subject line");
        if (i >= lines.size() || trim(lines[i]).empty())
            throw format_error("marker import: record " + std::to_string(record) +
                               " has an empty subject line");
        Email e;
        e.id = "rec-" + std::to_string(record);
        e.raw_subject = trim(lines[i]);
        ++i;
        while (i < lines.size()) {
            std::string t = trim(lines[i]);
            if (t != "@ann0" && t != "@ann1" && t != "@ann2") break;
            ++i;
            if (i >= lines.size())
                throw format_error("marker import: record " + std::to_string(record) + " " + t +
                                   " has no following line");
            std::string ref = trim(lines[i]);
            if (!ref.empty()) e.raw_references.push_back(ref);
            ++i;
        }
        std::string joined;
        for (size_t k = 0; k < body.size(); ++k) {
            if (k) joined.push_back('\n');
            joined += body[k];
        }
        e.raw_body = joined;
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<Email> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open corpus file: " + path);
    std::vector<Email> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error(path + ":" + std::to_string(n) + ": bad JSON: " + e.what());
        }
        Email e;
        e.id = j.value("id", "line-" + std::to_string(n));
        e.raw_body = j.value("body", "");
        e.raw_subject = j.value("subject", "");
        for (const char* key : {"ann0", "ann1", "ann2"})
            if (j.contains(key) && j[key].is_string()) e.raw_references.push_back(j[key]);
        out.push_back(std::move(e));
    }
    return out;
}

void save_jsonl(const std::vector<Email>& emails, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write corpus file: " + path);
    for (const Email& e : emails) {
        nlohmann::json j;
        j["id"] = e.id;
        j["body"] = e.raw_body;
        j["subject"] = e.raw_subject;
        const char* keys[] = {"ann0", "ann1", "ann2"};
        for (size_t k = 0; k < e.raw_references.size() && k < 3; ++k)
            j[keys[k]] = e.raw_references[k];
        out << j.dump() << "\n";
    }
}

}  // namespace subjgen
