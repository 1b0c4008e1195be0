#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "subjgen/checkpoint.hpp"
#include "subjgen/config.hpp"
#include "subjgen/corpus.hpp"
#include "subjgen/gradcheck.hpp"
#include "subjgen/metrics.hpp"
#include "subjgen/stopwords.hpp"
#include "subjgen/synthetic.hpp"
#include "subjgen/text.hpp"
#include "subjgen/training.hpp"
#include "subjgen/vocab.hpp"

using namespace subjgen;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string manifest_path;
    std::string stopwords_path;
    bool sequential = false;  // accepted for compatibility; runs are sequential
    std::map<std::string, std::string> overrides;
    FlatConfig config;
};

// training/model keys exposed both in the config file and as flags
const char* tunable_keys[] = {"batch_size", "lr_supervised", "lr_rl",       "clip_norm",
                              "patience",   "max_epochs",    "seed",        "max_ext",
                              "max_len",    "emb",           "hidden",      "filters",
                              "windows",    "esqe_emb",      "esqe_filters", "esqe_windows",
                              "esqe_ff_hidden"};

void add_common(CLI::App* cmd, CommonOpts& common) {
    cmd->add_option("--config", common.config_path,
                    "flat key = value config file (flags take precedence)");
    cmd->add_option("--manifest", common.manifest_path,
                    "manifest path (default: <first output>.manifest.json)");
    cmd->add_option("--stopwords", common.stopwords_path, "stopword override file");
    cmd->add_flag("--sequential", common.sequential, "force sequential execution");
    for (const char* key : tunable_keys) {
        std::string flag = "--" + std::string(key);
        for (char& c : flag)
            if (c == '_') c = '-';
        if (cmd->get_option_no_throw(flag)) continue;  // subcommand defines its own
        cmd->add_option(flag, common.overrides[key], "override config key " + std::string(key));
    }
}

void load_config(CommonOpts& common) {
    if (common.config_path.empty()) {
        const char* env = std::getenv("SUBJGEN_CONFIG");
        if (env && *env) common.config_path = env;
    }
    if (!common.config_path.empty()) common.config = FlatConfig::parse_file(common.config_path);
    for (const auto& [key, value] : common.overrides)
        if (!value.empty()) common.config.set(key, value);
}

std::set<std::string> resolve_stopwords(const CommonOpts& common) {
    std::string path = common.stopwords_path.empty()
                           ? common.config.get_string("stopwords", "")
                           : common.stopwords_path;
    return path.empty() ? builtin_stopwords() : load_stopwords(path);
}

TrainConfig train_config_from(const FlatConfig& cfg) {
    TrainConfig tc;
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size", tc.batch_size));
    tc.lr_supervised = cfg.get_double("lr_supervised", tc.lr_supervised);
    tc.lr_rl = cfg.get_double("lr_rl", tc.lr_rl);
    tc.clip_norm = cfg.get_double("clip_norm", tc.clip_norm);
    tc.patience = static_cast<int>(cfg.get_int("patience", tc.patience));
    tc.max_epochs = static_cast<int>(cfg.get_int("max_epochs", tc.max_epochs));
    tc.seed = static_cast<uint64_t>(cfg.get_int("seed", static_cast<long>(tc.seed)));
    tc.max_ext = static_cast<int>(cfg.get_int("max_ext", tc.max_ext));
    tc.max_len = static_cast<int>(cfg.get_int("max_len", tc.max_len));
    return tc;
}

std::vector<int> parse_windows(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(std::stoi(trim(item)));
    if (out.empty()) throw config_error("windows: empty list");
    return out;
}

ExtractorDims ext_dims_from(const FlatConfig& cfg) {
    ExtractorDims d;
    d.emb = static_cast<int>(cfg.get_int("emb", d.emb));
    d.hidden = static_cast<int>(cfg.get_int("hidden", d.hidden));
    d.filters = static_cast<int>(cfg.get_int("filters", d.filters));
    if (cfg.has("windows")) d.windows = parse_windows(cfg.get_string("windows", ""));
    return d;
}

AbstractorDims abs_dims_from(const FlatConfig& cfg) {
    AbstractorDims d;
    d.emb = static_cast<int>(cfg.get_int("emb", d.emb));
    d.hidden = static_cast<int>(cfg.get_int("hidden", d.hidden));
    return d;
}

// the estimator takes its own dimension keys, falling back to the shared ones
EsqeDims esqe_dims_from(const FlatConfig& cfg) {
    EsqeDims d;
    d.emb = static_cast<int>(cfg.get_int("esqe_emb", cfg.get_int("emb", d.emb)));
    d.filters = static_cast<int>(cfg.get_int("esqe_filters", cfg.get_int("filters", d.filters)));
    std::string win = cfg.get_string("esqe_windows", cfg.get_string("windows", ""));
    if (!win.empty()) d.windows = parse_windows(win);
    d.ff_hidden = static_cast<int>(cfg.get_int("esqe_ff_hidden", d.ff_hidden));
    return d;
}

RunManifest start_manifest(const std::string& command, const CommonOpts& common, uint64_t seed) {
    RunManifest m;
    m.command = command;
    m.seed = seed;
    m.config = common.config.entries();
    return m;
}

void finish_manifest(RunManifest& m, const CommonOpts& common, const std::string& first_output) {
    std::string path = common.manifest_path.empty() ? first_output + ".manifest.json"
                                                    : common.manifest_path;
    m.write(path);
}

std::vector<Email> load_segmented_corpus(const std::string& path) {
    std::vector<Email> out;
    for (Email& e : load_jsonl(path)) out.push_back(segment(std::move(e)));
    return out;
}

std::map<std::string, std::vector<std::string>> load_system_outputs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open system output: " + path);
    std::map<std::string, std::vector<std::string>> out;
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
        if (!j.contains("id")) throw format_error(path + ":" + std::to_string(n) + ": missing id");
        out[j["id"]] = tokenize(j.value("subject", ""));
    }
    return out;
}

std::map<std::string, double> load_id_ratings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open ratings file: " + path);
    std::map<std::string, double> out;
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
        if (!j.contains("id") || !j.contains("rating"))
            throw format_error(path + ":" + std::to_string(n) + ": need id and rating");
        out[j["id"]] = j["rating"];
    }
    return out;
}

std::string basename_of(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

// ---- subcommand bodies --------------------------------------------------

int cmd_preprocess(const CommonOpts& common, const std::string& in_path,
                   const std::string& format, const std::string& out_path) {
    std::vector<Email> raw;
    if (format == "marker") {
        std::ifstream in(in_path);
        if (!in) throw io_error("cannot open input: " + in_path);
        std::stringstream buf;
        buf << in.rdbuf();
        raw = import_marker_format(buf.str());
    } else if (format == "jsonl") {
        raw = load_jsonl(in_path);
    } else {
        throw config_error("preprocess: unknown format " + format);
    }
    size_t imported = raw.size();
    std::vector<Email> segmented;
    for (Email& e : raw) {
        if (trim(e.raw_body).empty()) continue;
        segmented.push_back(segment(std::move(e)));
    }
    std::vector<Email> kept;
    for (Email& e : segmented)
        if (filter_email(e)) kept.push_back(std::move(e));
    size_t filtered = kept.size();
    kept = deduplicate(kept);
    save_jsonl(kept, out_path);
    std::cerr << "preprocess: " << imported << " records, " << filtered << " after filter, "
              << kept.size() << " after dedup\n";
    RunManifest m = start_manifest("preprocess", common, 0);
    m.add_input(in_path);
    m.add_output(out_path);
    finish_manifest(m, common, out_path);
    return 0;
}

int cmd_synth(const CommonOpts& common, int n, uint64_t seed, const std::string& out_path) {
    auto synth = generate_synthetic(n, seed);
    save_jsonl(strip_synthetic(synth), out_path);
    std::cerr << "synth: wrote " << n << " emails to " << out_path << "\n";
    RunManifest m = start_manifest("synth", common, seed);
    m.add_output(out_path);
    finish_manifest(m, common, out_path);
    return 0;
}

int cmd_labels(const CommonOpts& common, const std::string& corpus_path,
               const std::string& out_path) {
    auto corpus = load_segmented_corpus(corpus_path);
    auto stop = resolve_stopwords(common);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw io_error("cannot write labels: " + out_path);
    for (const Email& e : corpus) {
        ProxyLabels lab = proxy_labels(e, stop);
        nlohmann::json j;
        j["id"] = lab.email_id;
        j["labels"] = lab.labels;
        j["positives"] = lab.positive_indices;
        out << j.dump() << "\n";
    }
    out.close();
    RunManifest m = start_manifest("labels", common, 0);
    m.add_input(corpus_path);
    m.add_output(out_path);
    finish_manifest(m, common, out_path);
    return 0;
}

int cmd_vocab(const CommonOpts& common, const std::string& corpus_path, int min_count,
              const std::string& out_path) {
    auto corpus = load_segmented_corpus(corpus_path);
    Vocabulary v = Vocabulary::build(corpus, min_count);
    v.save(out_path);
    std::cerr << "vocab: " << v.size() << " tokens\n";
    RunManifest m = start_manifest("vocab", common, 0);
    m.add_input(corpus_path);
    m.add_output(out_path);
    finish_manifest(m, common, out_path);
    return 0;
}

struct TrainIo {
    std::string train_path, dev_path, vocab_path, out_path, log_path;
};

int cmd_train_ext(const CommonOpts& common, const TrainIo& io) {
    TrainConfig tc = train_config_from(common.config);
    auto stop = resolve_stopwords(common);
    Vocabulary vocab = Vocabulary::load(io.vocab_path);
    ExtractorDims dims = ext_dims_from(common.config);
    auto train = label_corpus(load_segmented_corpus(io.train_path), vocab, stop, dims);
    auto dev = label_corpus(load_segmented_corpus(io.dev_path), vocab, stop, dims);
    Rng init(Rng(tc.seed).split("ext.init").next_u64());
    ExtractorModel model(vocab.size(), dims, init);
    std::optional<TrainLog> log;
    if (!io.log_path.empty()) log.emplace(io.log_path);
    FitResult res = pretrain_extractor(model, train, dev, tc, log ? &*log : nullptr);
    PrecisionRecall pr = extraction_precision_recall(model, dev, tc.max_ext);
    std::cerr << "train-ext: best dev loss " << res.best_dev << " at epoch " << res.best_epoch
              << " (" << res.epochs_run << " run); dev precision " << pr.precision << " recall "
              << pr.recall << "\n";
    save_checkpoint(io.out_path, model.parameters(), tc.seed);
    RunManifest m = start_manifest("train-ext", common, tc.seed);
    m.add_input(io.train_path);
    m.add_input(io.dev_path);
    m.add_input(io.vocab_path);
    m.add_output(io.out_path);
    finish_manifest(m, common, io.out_path);
    return 0;
}

int cmd_train_abs(const CommonOpts& common, const TrainIo& io) {
    TrainConfig tc = train_config_from(common.config);
    auto stop = resolve_stopwords(common);
    Vocabulary vocab = Vocabulary::load(io.vocab_path);
    ExtractorDims dims = ext_dims_from(common.config);
    auto train = label_corpus(load_segmented_corpus(io.train_path), vocab, stop, dims);
    auto dev = label_corpus(load_segmented_corpus(io.dev_path), vocab, stop, dims);
    Rng init(Rng(tc.seed).split("abs.init").next_u64());
    AbstractorModel model(vocab.size(), abs_dims_from(common.config), init);
    std::optional<TrainLog> log;
    if (!io.log_path.empty()) log.emplace(io.log_path);
    FitResult res = pretrain_abstractor(model, train, dev, vocab, tc, log ? &*log : nullptr);
    std::cerr << "train-abs: best dev loss " << res.best_dev << " at epoch " << res.best_epoch
              << " (" << res.epochs_run << " run)\n";
    save_checkpoint(io.out_path, model.parameters(), tc.seed);
    RunManifest m = start_manifest("train-abs", common, tc.seed);
    m.add_input(io.train_path);
    m.add_input(io.dev_path);
    m.add_input(io.vocab_path);
    m.add_output(io.out_path);
    finish_manifest(m, common, io.out_path);
    return 0;
}

int cmd_train_esqe(const CommonOpts& common, const TrainIo& io, const std::string& ratings_path,
                   const std::string& dev_ratings_path) {
    TrainConfig tc = train_config_from(common.config);
    auto stop = resolve_stopwords(common);
    Vocabulary vocab = Vocabulary::load(io.vocab_path);

    EsqeTrainConfig ec;
    ec.batch_size = tc.batch_size;
    ec.lr = tc.lr_supervised;
    ec.clip_norm = tc.clip_norm;
    ec.patience = tc.patience;
    ec.max_epochs = tc.max_epochs;
    ec.seed = tc.seed;

    auto encode_ratings = [&](const std::string& path) {
        std::vector<RatingExample> out;
        for (const RawRating& r : load_ratings_jsonl(path)) {
            RatingExample ex;
            ex.body_ids = vocab.encode(tokenize(r.body));
            ex.subject_ids = vocab.encode(tokenize(r.subject));
            ex.rating = r.rating;
            if (ex.body_ids.empty() || ex.subject_ids.empty())
                throw format_error("ratings: empty body or subject in " + path);
            out.push_back(std::move(ex));
        }
        return out;
    };

    std::vector<RatingExample> train, dev;
    if (!ratings_path.empty()) {
        if (dev_ratings_path.empty())
            throw config_error("train-esqe: --ratings requires --dev-ratings");
        train = encode_ratings(ratings_path);
        dev = encode_ratings(dev_ratings_path);
    } else {
        Rng mix(Rng(tc.seed).split("esqe.mix").next_u64());
        train = build_rating_dataset(load_segmented_corpus(io.train_path), vocab, stop, mix);
        dev = build_rating_dataset(load_segmented_corpus(io.dev_path), vocab, stop, mix);
    }

    Rng init(Rng(tc.seed).split("esqe.init").next_u64());
    EsqeModel model(vocab.size(), esqe_dims_from(common.config), init);
    EsqeTrainResult res = train_esqe(model, train, dev, ec);
    std::cerr << "train-esqe: best dev MSE " << res.best_dev_mse << " at epoch " << res.best_epoch
              << " (" << res.epochs_run << " run)\n";
    save_checkpoint(io.out_path, model.parameters(), tc.seed);
    RunManifest m = start_manifest("train-esqe", common, tc.seed);
    if (!ratings_path.empty()) {
        m.add_input(ratings_path);
        m.add_input(dev_ratings_path);
    } else {
        m.add_input(io.train_path);
        m.add_input(io.dev_path);
    }
    m.add_input(io.vocab_path);
    m.add_output(io.out_path);
    finish_manifest(m, common, io.out_path);
    return 0;
}

int cmd_train_rl(const CommonOpts& common, const TrainIo& io, const std::string& ext_path,
                 const std::string& abs_path, const std::string& esqe_path,
                 const std::string& baseline_out) {
    TrainConfig tc = train_config_from(common.config);
    auto stop = resolve_stopwords(common);
    Vocabulary vocab = Vocabulary::load(io.vocab_path);
    ExtractorDims dims = ext_dims_from(common.config);

    Rng init(Rng(tc.seed).split("rl.init").next_u64());
    ExtractorModel policy(vocab.size(), dims, init);
    AbstractorModel abstractor(vocab.size(), abs_dims_from(common.config), init);
    EsqeModel esqe(vocab.size(), esqe_dims_from(common.config), init);
    BaselineNetwork baseline(dims, init);
    restore_parameters(load_checkpoint(ext_path), policy.parameters());
    restore_parameters(load_checkpoint(abs_path), abstractor.parameters());
    restore_parameters(load_checkpoint(esqe_path), esqe.parameters());

    auto train = label_corpus(load_segmented_corpus(io.train_path), vocab, stop, dims);
    auto dev = label_corpus(load_segmented_corpus(io.dev_path), vocab, stop, dims);
    std::optional<TrainLog> log;
    if (!io.log_path.empty()) log.emplace(io.log_path);
    RlResult res = rl_train(policy, baseline, abstractor, esqe, train, dev, vocab, tc,
                            log ? &*log : nullptr);
    std::cerr << "train-rl: dev ESQE " << res.pre_dev_esqe << " -> " << res.best_dev_esqe
              << " (best epoch " << res.best_epoch << ", " << res.epochs_run << " run, "
              << res.skipped_episodes << " skipped)\n";
    save_checkpoint(io.out_path, policy.parameters(), tc.seed);
    if (!baseline_out.empty()) save_checkpoint(baseline_out, baseline.parameters(), tc.seed);
    RunManifest m = start_manifest("train-rl", common, tc.seed);
    for (const std::string& p : {io.train_path, io.dev_path, io.vocab_path, ext_path, abs_path,
                                 esqe_path})
        m.add_input(p);
    m.add_output(io.out_path);
    if (!baseline_out.empty()) m.add_output(baseline_out);
    finish_manifest(m, common, io.out_path);
    return 0;
}

int cmd_generate(const CommonOpts& common, const std::string& corpus_path,
                 const std::string& vocab_path, const std::string& ext_path,
                 const std::string& abs_path, const std::string& out_path, int beam) {
    TrainConfig tc = train_config_from(common.config);
    auto stop = resolve_stopwords(common);
    Vocabulary vocab = Vocabulary::load(vocab_path);
    ExtractorDims dims = ext_dims_from(common.config);
    Rng init(1);
    ExtractorModel extractor(vocab.size(), dims, init);
    AbstractorModel abstractor(vocab.size(), abs_dims_from(common.config), init);
    restore_parameters(load_checkpoint(ext_path), extractor.parameters());
    restore_parameters(load_checkpoint(abs_path), abstractor.parameters());

    auto corpus = load_segmented_corpus(corpus_path);
    auto labeled = label_corpus(corpus, vocab, stop, dims);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw io_error("cannot write output: " + out_path);
    for (const LabeledEmail& le : labeled) {
        std::vector<std::string> gen =
            generate_for_email(extractor, abstractor, le, vocab, tc, beam);
        nlohmann::json j;
        j["id"] = le.id;
        j["subject"] = join_tokens(gen);
        out << j.dump() << "\n";
    }
    out.close();
    RunManifest m = start_manifest("generate", common, tc.seed);
    for (const std::string& p : {corpus_path, vocab_path, ext_path, abs_path}) m.add_input(p);
    m.add_output(out_path);
    finish_manifest(m, common, out_path);
    return 0;
}

int cmd_evaluate(const CommonOpts& common, const std::string& corpus_path,
                 const std::vector<std::string>& system_paths, const std::string& esqe_path,
                 const std::string& vocab_path, const std::string& ratings_path,
                 const std::string& report_prefix, bool add_lead2) {
    auto corpus = load_segmented_corpus(corpus_path);
    EvalOptions opts;
    opts.stopwords = resolve_stopwords(common);

    std::optional<Vocabulary> vocab;
    std::optional<EsqeModel> esqe;
    Rng init(1);
    if (!esqe_path.empty()) {
        if (vocab_path.empty()) throw config_error("evaluate: --esqe requires --vocab");
        vocab.emplace(Vocabulary::load(vocab_path));
        esqe.emplace(vocab->size(), esqe_dims_from(common.config), init);
        restore_parameters(load_checkpoint(esqe_path), esqe->parameters());
        opts.esqe = &*esqe;
        opts.vocab = &*vocab;
    }

    std::vector<SystemOutput> systems;
    for (const std::string& path : system_paths) {
        auto by_id = load_system_outputs(path);
        SystemOutput sys;
        sys.name = basename_of(path);
        for (const Email& e : corpus) {
            auto it = by_id.find(e.id);
            if (it == by_id.end())
                throw contract_error("evaluate: " + path + " missing id " + e.id);
            sys.subjects.push_back(it->second);
        }
        systems.push_back(std::move(sys));
    }
    if (add_lead2) {
        SystemOutput lead{"lead2", {}};
        for (const Email& e : corpus) lead.subjects.push_back(lead2(e));
        systems.push_back(std::move(lead));
    }
    if (systems.empty()) throw config_error("evaluate: no systems given");

    std::vector<double> ratings;
    if (!ratings_path.empty()) {
        auto by_id = load_id_ratings(ratings_path);
        for (const Email& e : corpus) {
            auto it = by_id.find(e.id);
            if (it == by_id.end()) throw contract_error("evaluate: ratings missing id " + e.id);
            ratings.push_back(it->second);
        }
        opts.ratings = &ratings;
    }

    EvalReport report = evaluate_systems(systems, corpus, opts);
    std::string csv = report_prefix + ".csv";
    std::string json = report_prefix + ".json";
    write_report_csv(report, csv);
    write_report_json(report, json);
    for (const auto& sys : report.systems) {
        std::cerr << sys.name << ":";
        for (const auto& [metric, mean] : sys.mean) std::cerr << " " << metric << "=" << mean;
        std::cerr << "\n";
    }
    RunManifest m = start_manifest("evaluate", common, 0);
    m.add_input(corpus_path);
    for (const std::string& p : system_paths) m.add_input(p);
    m.add_output(csv);
    m.add_output(json);
    finish_manifest(m, common, json);
    return 0;
}

int cmd_stats(const CommonOpts& common, const std::vector<std::string>& corpus_paths,
              const std::string& out_path) {
    nlohmann::json j;
    for (const std::string& path : corpus_paths) {
        auto corpus = load_segmented_corpus(path);
        CorpusStats st = corpus_stats(corpus);
        j[basename_of(path)] = {{"docs", st.docs},
                                {"avg_doc_words", st.avg_doc_words},
                                {"avg_subject_words", st.avg_subject_words}};
        std::cerr << path << ": docs=" << st.docs << " avg_doc_words=" << st.avg_doc_words
                  << " avg_subject_words=" << st.avg_subject_words << "\n";
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw io_error("cannot write stats: " + out_path);
    out << j.dump(2) << "\n";
    out.close();
    RunManifest m = start_manifest("stats", common, 0);
    for (const std::string& p : corpus_paths) m.add_input(p);
    m.add_output(out_path);
    finish_manifest(m, common, out_path);
    return 0;
}

int cmd_gradcheck(uint64_t seed) {
    auto results = ad::primitive_gradcheck_suite(seed, 10);
    bool ok = true;
    for (const auto& [name, err] : results) {
        bool pass = err < 1e-3;
        ok = ok && pass;
        std::cerr << (pass ? "PASS " : "FAIL ") << name << " max_rel_err=" << err << "\n";
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"subjgen: email subject line generation pipeline"};
    app.require_subcommand(1);

    CommonOpts common;

    std::string in_path, out_path, format = "marker";
    CLI::App* preprocess = app.add_subcommand("preprocess", "clean, filter and dedup a corpus");
    preprocess->add_option("--in", in_path, "input file")->required();
    preprocess->add_option("--format", format, "input format: marker|jsonl");
    preprocess->add_option("--out", out_path, "output JSONL corpus")->required();
    add_common(preprocess, common);

    int synth_n = 200;
    uint64_t synth_seed = 1;
    std::string synth_out;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("--n", synth_n, "number of emails")->required();
    synth->add_option("--seed", synth_seed, "generation seed")->required();
    synth->add_option("--out", synth_out, "output JSONL corpus")->required();
    add_common(synth, common);

    std::string labels_corpus, labels_out;
    CLI::App* labels = app.add_subcommand("labels", "write proxy sentence labels");
    labels->add_option("--corpus", labels_corpus, "JSONL corpus")->required();
    labels->add_option("--out", labels_out, "output JSONL labels")->required();
    add_common(labels, common);

    std::string vocab_corpus, vocab_out;
    int min_count = 2;
    CLI::App* vocab_cmd = app.add_subcommand("vocab", "build the vocabulary");
    vocab_cmd->add_option("--corpus", vocab_corpus, "training JSONL corpus")->required();
    vocab_cmd->add_option("--min-count", min_count, "frequency threshold");
    vocab_cmd->add_option("--out", vocab_out, "output vocab file")->required();
    add_common(vocab_cmd, common);

    TrainIo io;
    auto add_train_io = [&](CLI::App* cmd) {
        cmd->add_option("--train", io.train_path, "training JSONL corpus")->required();
        cmd->add_option("--dev", io.dev_path, "dev JSONL corpus")->required();
        cmd->add_option("--vocab", io.vocab_path, "vocabulary file")->required();
        cmd->add_option("--out", io.out_path, "output checkpoint")->required();
        cmd->add_option("--log", io.log_path, "per-epoch CSV log");
        add_common(cmd, common);
    };

    CLI::App* train_ext = app.add_subcommand("train-ext", "pretrain the extractor");
    add_train_io(train_ext);

    CLI::App* train_abs = app.add_subcommand("train-abs", "pretrain the abstractor");
    add_train_io(train_abs);

    std::string ratings_path, dev_ratings_path;
    CLI::App* train_esqe_cmd = app.add_subcommand("train-esqe", "train the quality estimator");
    add_train_io(train_esqe_cmd);
    train_esqe_cmd->add_option("--ratings", ratings_path,
                               "rated examples JSONL {body, subject, rating}");
    train_esqe_cmd->add_option("--dev-ratings", dev_ratings_path, "dev rated examples JSONL");

    std::string ext_path, abs_path, esqe_path, baseline_out;
    CLI::App* train_rl = app.add_subcommand("train-rl", "policy-gradient training");
    add_train_io(train_rl);
    train_rl->add_option("--ext", ext_path, "pretrained extractor checkpoint")->required();
    train_rl->add_option("--abs", abs_path, "frozen abstractor checkpoint")->required();
    train_rl->add_option("--esqe", esqe_path, "frozen estimator checkpoint")->required();
    train_rl->add_option("--baseline-out", baseline_out, "baseline checkpoint output");

    std::string gen_corpus, gen_vocab, gen_ext, gen_abs, gen_out;
    int beam = 1;
    CLI::App* generate = app.add_subcommand("generate", "extract and rewrite subjects");
    generate->add_option("--corpus", gen_corpus, "JSONL corpus")->required();
    generate->add_option("--vocab", gen_vocab, "vocabulary file")->required();
    generate->add_option("--ext", gen_ext, "extractor checkpoint")->required();
    generate->add_option("--abs", gen_abs, "abstractor checkpoint")->required();
    generate->add_option("--out", gen_out, "output JSONL {id, subject}")->required();
    generate->add_option("--beam", beam, "beam width (1 = greedy)");
    add_common(generate, common);

    std::string eval_corpus, eval_esqe, eval_vocab, eval_ratings, report_prefix;
    std::vector<std::string> eval_systems;
    bool add_lead2_baseline = false;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score system outputs");
    evaluate->add_option("--corpus", eval_corpus, "gold JSONL corpus")->required();
    evaluate->add_option("--system", eval_systems, "system output JSONL (repeatable)");
    evaluate->add_option("--esqe", eval_esqe, "estimator checkpoint");
    evaluate->add_option("--vocab", eval_vocab, "vocabulary (needed with --esqe)");
    evaluate->add_option("--ratings", eval_ratings, "mean ratings JSONL {id, rating}");
    evaluate->add_option("--report", report_prefix, "report path prefix")->required();
    evaluate->add_flag("--lead2", add_lead2_baseline, "append the LEAD-2 baseline");
    add_common(evaluate, common);

    CLI::App* correlate = app.add_subcommand("correlate", "metric-rating correlations");
    correlate->add_option("--corpus", eval_corpus, "gold JSONL corpus")->required();
    correlate->add_option("--system", eval_systems, "system output JSONL")->required();
    correlate->add_option("--esqe", eval_esqe, "estimator checkpoint");
    correlate->add_option("--vocab", eval_vocab, "vocabulary (needed with --esqe)");
    correlate->add_option("--ratings", eval_ratings, "mean ratings JSONL {id, rating}")
        ->required();
    correlate->add_option("--report", report_prefix, "report path prefix")->required();
    add_common(correlate, common);

    std::vector<std::string> stats_corpora;
    std::string stats_out = "stats.json";
    CLI::App* stats = app.add_subcommand("stats", "corpus statistics");
    stats->add_option("--corpus", stats_corpora, "JSONL corpus (repeatable)")->required();
    stats->add_option("--out", stats_out, "output JSON");
    add_common(stats, common);

    uint64_t gc_seed = 12345;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference primitive suite");
    gradcheck->add_option("--seed", gc_seed, "random point seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        load_config(common);
        if (preprocess->parsed()) return cmd_preprocess(common, in_path, format, out_path);
        if (synth->parsed()) return cmd_synth(common, synth_n, synth_seed, synth_out);
        if (labels->parsed()) return cmd_labels(common, labels_corpus, labels_out);
        if (vocab_cmd->parsed()) return cmd_vocab(common, vocab_corpus, min_count, vocab_out);
        if (train_ext->parsed()) return cmd_train_ext(common, io);
        if (train_abs->parsed()) return cmd_train_abs(common, io);
        if (train_esqe_cmd->parsed())
            return cmd_train_esqe(common, io, ratings_path, dev_ratings_path);
        if (train_rl->parsed())
            return cmd_train_rl(common, io, ext_path, abs_path, esqe_path, baseline_out);
        if (generate->parsed())
            return cmd_generate(common, gen_corpus, gen_vocab, gen_ext, gen_abs, gen_out, beam);
        if (evaluate->parsed())
            return cmd_evaluate(common, eval_corpus, eval_systems, eval_esqe, eval_vocab,
                                eval_ratings, report_prefix, add_lead2_baseline);
        if (correlate->parsed())
            return cmd_evaluate(common, eval_corpus, eval_systems, eval_esqe, eval_vocab,
                                eval_ratings, report_prefix, false);
        if (stats->parsed()) return cmd_stats(common, stats_corpora, stats_out);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
