#include "eraser/corpus.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "eraser/errors.hpp"

namespace eraser {

using nlohmann::json;

std::string role_name(Role role) {
    switch (role) {
        case Role::harmful: return "harmful";
        case Role::helpful: return "helpful";
        case Role::refusal: return "refusal";
    }
    throw std::logic_error("role_name: bad role");
}

Role role_from_name(const std::string& name) {
    if (name == "harmful") return Role::harmful;
    if (name == "helpful") return Role::helpful;
    if (name == "refusal") return Role::refusal;
    throw FormatError("unknown corpus role: " + name);
}

QAPair make_qa_pair(std::string prompt, std::string response, Role role, std::string provenance,
                    std::string topic) {
    if (prompt.empty()) throw std::invalid_argument("QAPair: empty prompt");
    if (response.empty()) throw std::invalid_argument("QAPair: empty response");
    QAPair p;
    p.prompt = std::move(prompt);
    p.response = std::move(response);
    p.role = role;
    p.provenance = std::move(provenance);
    p.topic = std::move(topic);
    return p;
}

void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& item : corpus.items) {
        json j;
        j["prompt"] = item.prompt;
        j["response"] = item.response;
        j["role"] = role_name(item.role);
        j["provenance"] = item.provenance;
        j["topic"] = item.topic;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Corpus load_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Corpus c;
    std::string line;
    bool role_set = false;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("prompt") || !j.contains("response") || !j.contains("role")) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": record needs prompt/response/role");
        }
        QAPair p = make_qa_pair(j["prompt"].get<std::string>(), j["response"].get<std::string>(),
                                role_from_name(j["role"].get<std::string>()),
                                j.value("provenance", std::string{}), j.value("topic", std::string{}));
        if (!role_set) {
            c.role = p.role;
            role_set = true;
        } else if (p.role != c.role) {
            throw FormatError(path.string() + ": mixed roles in one corpus file");
        }
        c.items.push_back(std::move(p));
    }
    return c;
}

std::string normalize_topic(const std::string& name) {
    std::string out;
    bool pending_space = false;
    for (char ch : name) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

void PromptTemplate::validate() const {
    const auto open = pattern.find('[');
    const auto close = pattern.find(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        throw ConfigError("template " + std::to_string(id) + ": needs one [placeholder] slot");
    }
    if (pattern.find('[', open + 1) != std::string::npos ||
        pattern.find(']', close + 1) != std::string::npos) {
        throw ConfigError("template " + std::to_string(id) + ": placeholder must occur exactly once");
    }
}

std::string PromptTemplate::render(const std::string& filler) const {
    validate();
    if (filler.empty()) throw std::invalid_argument("PromptTemplate::render: empty filler");
    const auto open = pattern.find('[');
    const auto close = pattern.find(']');
    return pattern.substr(0, open) + filler + pattern.substr(close + 1);
}

std::vector<PromptTemplate> load_templates_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<PromptTemplate> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        PromptTemplate t;
        t.id = j.at("id").get<int>();
        t.pattern = j.at("pattern").get<std::string>();
        t.validate();
        out.push_back(std::move(t));
    }
    return out;
}

void save_templates_jsonl(const std::vector<PromptTemplate>& templates,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& t : templates) {
        json j;
        j["id"] = t.id;
        j["pattern"] = t.pattern;
        out << j.dump() << '\n';
    }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace eraser
