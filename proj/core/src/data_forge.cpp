#include "eraser/data_forge.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "eraser/errors.hpp"
#include "eraser/rng.hpp"

namespace eraser {

using nlohmann::json;

namespace {

// RFC-4180 style CSV: quoted fields may contain commas, quotes ("") and
// newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !field.empty()) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                    row_started = false;
                }
                break;
            default:
                field.push_back(c);
                row_started = true;
        }
    }
    if (row_started || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> dedup_stable(std::vector<std::string> items) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& s : items) {
        if (seen.insert(s).second) out.push_back(std::move(s));
    }
    return out;
}

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

std::vector<std::string> load_harmful_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw std::invalid_argument("query file is empty: " + path.string());
    }

    std::vector<std::string> queries;
    if (has_suffix(path.string(), ".jsonl")) {
        std::istringstream lines(text);
        std::string line;
        size_t lineno = 0;
        while (std::getline(lines, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
            if (!j.contains("prompt")) {
                throw FormatError(path.string() + ": JSONL records need a \"prompt\" field");
            }
            queries.push_back(j["prompt"].get<std::string>());
        }
    } else {
        const auto rows = parse_csv(text);
        if (rows.empty()) throw std::invalid_argument("query file is empty: " + path.string());
        const auto& header = rows.front();
        int col = -1;
        for (size_t i = 0; i < header.size(); ++i) {
            if (lower(header[i]) == "goal") col = static_cast<int>(i);
        }
        if (col < 0) {
            throw FormatError(path.string() + ": header does not name a \"goal\" column");
        }
        for (size_t r = 1; r < rows.size(); ++r) {
            if (static_cast<int>(rows[r].size()) <= col) continue;
            const std::string& q = rows[r][static_cast<size_t>(col)];
            if (!q.empty()) queries.push_back(q);
        }
    }

    queries = dedup_stable(std::move(queries));
    if (queries.empty()) throw std::invalid_argument("query file has no queries: " + path.string());
    return queries;
}

std::string mine_topic_phrase(const std::string& query) {
    static const std::set<std::string> kStop = {
        "give",    "write",   "provide",  "explain",  "describe", "create",  "develop",
        "teach",   "show",    "tell",     "generate", "outline",  "demonstrate",
        "instruct", "detail", "compose",  "draft",    "design",   "produce", "offer",
        "release", "publish", "suggest",  "list",     "share",    "craft",
        "a",       "an",      "the",      "me",       "us",       "please",  "detailed",
        "step-by-step", "steps", "tutorial", "guide", "instructions", "instruction",
        "on",      "for",     "to",       "of",       "how",      "that",    "someone",
        "i",       "can",     "could",    "would",    "into"};

    std::istringstream words(lower(query));
    std::vector<std::string> toks;
    std::string w;
    while (words >> w) {
        while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
        if (!w.empty()) toks.push_back(w);
    }
    size_t start = 0;
    while (start < toks.size() && kStop.count(toks[start]) > 0) ++start;
    if (start >= toks.size()) start = 0;  // never strip everything
    std::string out;
    for (size_t i = start; i < toks.size(); ++i) {
        if (!out.empty()) out.push_back(' ');
        out += toks[i];
    }
    return normalize_topic(out);
}

std::vector<Topic> mine_topics(const std::vector<std::string>& queries) {
    std::vector<Topic> topics;
    std::unordered_set<std::string> seen;
    for (size_t i = 0; i < queries.size(); ++i) {
        const std::string phrase = mine_topic_phrase(queries[i]);
        if (phrase.empty()) continue;
        if (seen.insert(phrase).second) {
            Topic t;
            t.name = phrase;
            t.source_queries.push_back(static_cast<int>(i));
            topics.push_back(std::move(t));
        } else {
            for (auto& t : topics) {
                if (t.name == phrase) {
                    t.source_queries.push_back(static_cast<int>(i));
                    break;
                }
            }
        }
    }
    return topics;
}

ForgedCorpus generate_harmful_answers(const std::vector<std::string>& queries,
                                      TextGenerator& generator) {
    ForgedCorpus out;
    out.corpus.role = Role::harmful;
    for (size_t i = 0; i < queries.size(); ++i) {
        auto answer = generator.generate(queries[i]);
        if (!answer || answer->empty()) {
            out.skipped.push_back({static_cast<int>(i), queries[i]});
            continue;
        }
        out.corpus.items.push_back(make_qa_pair(queries[i], std::move(*answer), Role::harmful,
                                                generator.id(), mine_topic_phrase(queries[i])));
    }
    return out;
}

std::vector<std::string> extract_entities(const std::string& answer, EntityExtractor& extractor,
                                          bool* failed) {
    if (failed) *failed = false;
    if (answer.empty()) return {};
    auto res = extractor.extract(answer);
    if (!res) {
        if (failed) *failed = true;
        return {};
    }
    // Case-insensitive order-stable dedup.
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& e : *res) {
        if (e.empty()) continue;
        if (seen.insert(lower(e)).second) out.push_back(std::move(e));
    }
    return out;
}

std::vector<EntityQuestion> build_entity_questions(const std::vector<std::string>& entities,
                                                   const std::vector<PromptTemplate>& templates,
                                                   uint64_t rng_seed) {
    if (templates.empty()) throw ConfigError("build_entity_questions: no templates loaded");
    for (const auto& t : templates) t.validate();
    std::vector<EntityQuestion> out;
    out.reserve(entities.size());
    for (size_t i = 0; i < entities.size(); ++i) {
        Rng rng(mix_seed(rng_seed, i));
        const auto& tpl = templates[rng.below(templates.size())];
        out.push_back({entities[i], tpl.render(entities[i]), tpl.id});
    }
    return out;
}

ForgedCorpus build_helpful_dataset(const std::vector<EntityQuestion>& questions,
                                   TextGenerator& teacher) {
    ForgedCorpus out;
    out.corpus.role = Role::helpful;
    for (size_t i = 0; i < questions.size(); ++i) {
        auto answer = teacher.generate(questions[i].question);
        if (!answer || answer->empty()) {
            out.skipped.push_back({static_cast<int>(i), questions[i].question});
            continue;
        }
        out.corpus.items.push_back(make_qa_pair(
            questions[i].question, std::move(*answer), Role::helpful,
            teacher.id() + ";entity=" + questions[i].entity + ";template=" +
                std::to_string(questions[i].template_id),
            questions[i].entity));
    }
    return out;
}

ForgedCorpus build_refusal_dataset(const std::vector<std::string>& harmful_queries,
                                   TextGenerator& teacher) {
    ForgedCorpus out;
    out.corpus.role = Role::refusal;
    for (size_t i = 0; i < harmful_queries.size(); ++i) {
        // Raw queries, no disguise: the aligned teacher should refuse.
        auto answer = teacher.generate(harmful_queries[i]);
        if (!answer || answer->empty()) {
            out.skipped.push_back({static_cast<int>(i), harmful_queries[i]});
            continue;
        }
        out.corpus.items.push_back(make_qa_pair(harmful_queries[i], std::move(*answer),
                                                Role::refusal, teacher.id(),
                                                mine_topic_phrase(harmful_queries[i])));
    }
    return out;
}

AdvExtentSet build_advextent(const std::vector<Topic>& topics,
                             const std::vector<PromptTemplate>& templates) {
    if (templates.size() != 3) {
        throw ConfigError("build_advextent: exactly three templates required, got " +
                          std::to_string(templates.size()));
    }
    for (const auto& t : templates) t.validate();

    AdvExtentSet out;
    std::unordered_set<std::string> seen;
    for (const auto& topic : topics) {
        const std::string norm = normalize_topic(topic.name);
        if (norm.empty()) continue;
        if (!seen.insert(norm).second) {
            ++out.duplicate_topics_dropped;
            continue;
        }
        for (const auto& tpl : templates) {
            out.items.push_back({norm, tpl.render(norm), tpl.id});
        }
    }
    return out;
}

Corpus substitute_random_answers(const Corpus& harmful, const AugmentationSpec& spec,
                                 uint64_t seed, const CharTokenizer& tok) {
    if (harmful.role != Role::harmful) {
        throw std::invalid_argument("substitute_random_answers: corpus role must be harmful");
    }
    Corpus out;
    out.role = Role::harmful;
    out.items.reserve(harmful.items.size());
    for (size_t i = 0; i < harmful.items.size(); ++i) {
        const auto& item = harmful.items[i];
        const int len = std::max(1, static_cast<int>(tok.encode(item.response).size()));
        const TokenSeq random = make_random_target(len, len, spec, mix_seed(seed, i));
        QAPair p = item;
        p.response = tok.decode(random);
        p.provenance = item.provenance + ";random-substitution";
        out.items.push_back(std::move(p));
    }
    return out;
}

}  // namespace eraser
