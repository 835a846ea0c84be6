#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace eraser {

enum class Role { harmful, helpful, refusal };

std::string role_name(Role role);
Role role_from_name(const std::string& name);

// A prompt/response pair with its corpus role. Prompt and response are
// non-empty by construction.
struct QAPair {
    std::string prompt;
    std::string response;
    Role role = Role::harmful;
    std::string provenance;
    std::string topic;
};

QAPair make_qa_pair(std::string prompt, std::string response, Role role, std::string provenance,
                    std::string topic = {});

// Role-typed, ordered collection, persisted as JSON-lines.
struct Corpus {
    Role role = Role::harmful;
    std::vector<QAPair> items;

    size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
};

void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus_jsonl(const std::filesystem::path& path);

// A mined or user-supplied harmful-activity phrase.
struct Topic {
    std::string name;
    std::vector<int> source_queries;  // indices into the originating query list
};

// Case-fold + whitespace-collapse; topic names are unique under this form.
std::string normalize_topic(const std::string& name);

// One placeholder slot delimited by square brackets, e.g. "[entity name]".
struct PromptTemplate {
    int id = 0;
    std::string pattern;

    std::string render(const std::string& filler) const;
    void validate() const;
};

std::vector<PromptTemplate> load_templates_jsonl(const std::filesystem::path& path);
void save_templates_jsonl(const std::vector<PromptTemplate>& templates,
                          const std::filesystem::path& path);

// Plain-text helpers (one item per line, blank lines skipped).
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::vector<std::string>& lines, const std::filesystem::path& path);

}  // namespace eraser
