#include "subjgen/synthetic.hpp"

#include <array>

#include "subjgen/rng.hpp"
#include "subjgen/text.hpp"

namespace subjgen {

namespace {

const std::array<const char*, 16> entities = {
    "acme",    "zenith",   "quorum",  "apex",     "borealis", "cascade",
    "dynacorp","evergreen","fulcrum", "gridline", "harborview","ionix",
    "keystone","lumina",   "meridian","northwind",
};

const std::array<const char*, 14> actions = {
    "budget",  "contract", "invoice",  "audit",    "merger",  "training", "launch",
    "migration","outage",  "renewal",  "forecast", "proposal","rollout",  "upgrade",
};

const std::array<const char*, 12> dates = {
    "monday", "tuesday", "wednesday", "thursday", "friday",  "january",
    "march",  "april",   "june",      "september","october", "december",
};

const std::array<const char*, 8> extras = {
    "timeline", "pricing", "headcount", "inventory",
    "compliance","logistics","staffing", "milestones",
};

// Filler sentences avoid every pool word and carry at least nine words
// each so three sentences always clear the 25-word floor.
const std::array<const char*, 10> fillers = {
    "hi team , i hope your week has been going well so far .",
    "hello everyone , here is a quick note following our earlier conversation .",
    "thanks again for all of the help you have given us recently .",
    "i will be away from my desk for part of the afternoon today .",
    "feel free to reach out to me if anything below is unclear .",
    "we can walk through any open questions together during our next call .",
    "let me know if you would like to set up some time to discuss .",
    "i appreciate your patience while we pulled these materials together for everyone .",
    "it was good to catch up with several of you at the meeting .",
    "best regards , and thanks as always for your continued support here .",
};

// salient templates: placeholders E (entity), A (action), D (date), X (extra)
const std::array<const char*, 3> salient_primary = {
    "the A review for E is planned for D as discussed .",
    "please confirm the E A details with the group before D .",
    "we finalized the A plan for E on D this cycle .",
};

const std::array<const char*, 2> salient_secondary = {
    "the updated X numbers for the E A are attached here as well .",
    "let me know whether the X summary for E still needs any changes .",
};

std::string expand(const char* tmpl, const std::string& e, const std::string& a,
                   const std::string& d, const std::string& x) {
    std::string out;
    for (const char* p = tmpl; *p; ++p) {
        switch (*p) {
            case 'E': out += e; break;
            case 'A': out += a; break;
            case 'D': out += d; break;
            case 'X': out += x; break;
            default: out.push_back(*p);
        }
    }
    return out;
}

}  // namespace

std::vector<SyntheticEmail> generate_synthetic(int n, uint64_t seed) {
    if (n < 1) throw contract_error("generate_synthetic: n must be >= 1");
    Rng rng(seed);
    std::vector<SyntheticEmail> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::string entity = entities[static_cast<size_t>(rng.next_int(entities.size()))];
        std::string action = actions[static_cast<size_t>(rng.next_int(actions.size()))];
        std::string date = dates[static_cast<size_t>(rng.next_int(dates.size()))];
        std::string extra = extras[static_cast<size_t>(rng.next_int(extras.size()))];

        bool two_salient = rng.next_double() < 0.5;
        std::vector<std::string> salient;
        salient.push_back(expand(
            salient_primary[static_cast<size_t>(rng.next_int(salient_primary.size()))], entity,
            action, date, extra));
        if (two_salient)
            salient.push_back(expand(
                salient_secondary[static_cast<size_t>(rng.next_int(salient_secondary.size()))],
                entity, action, date, extra));

        int n_filler = 2 + rng.next_int(3);  // 2..4
        std::vector<int> filler_ids;
        while (static_cast<int>(filler_ids.size()) < n_filler) {
            int f = rng.next_int(fillers.size());
            bool dup = false;
            for (int g : filler_ids) dup = dup || g == f;
            if (!dup) filler_ids.push_back(f);
        }

        // greeting first, sign-off last, salient sentences in between
        std::vector<std::pair<bool, std::string>> middle;  // (is_salient, text)
        for (const auto& s : salient) middle.emplace_back(true, s);
        for (size_t k = 1; k + 1 < filler_ids.size(); ++k)
            middle.emplace_back(false, fillers[static_cast<size_t>(filler_ids[k])]);
        rng.shuffle(middle);

        std::vector<std::pair<bool, std::string>> ordered;
        ordered.emplace_back(false, fillers[static_cast<size_t>(filler_ids.front())]);
        for (auto& m : middle) ordered.push_back(std::move(m));
        ordered.emplace_back(false, fillers[static_cast<size_t>(filler_ids.back())]);

        SyntheticEmail se;
        std::string body;
        for (size_t k = 0; k < ordered.size(); ++k) {
            if (k) body.push_back(' ');
            body += ordered[k].second;
            if (ordered[k].first) se.salient_indices.push_back(static_cast<int>(k));
        }

        se.keywords = {entity, action, date};
        if (two_salient) se.keywords.push_back(extra);

        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "synth-%06d", i);
        se.email.id = idbuf;
        se.email.raw_body = body;
        se.email.raw_subject = join_tokens(se.keywords);
        se.email = segment(std::move(se.email));
        out.push_back(std::move(se));
    }
    return out;
}

std::vector<Email> strip_synthetic(const std::vector<SyntheticEmail>& s) {
    std::vector<Email> out;
    out.reserve(s.size());
    for (const auto& e : s) out.push_back(e.email);
    return out;
}

}  // namespace subjgen
