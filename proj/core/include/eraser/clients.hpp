#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eraser/model.hpp"
#include "eraser/tokenizer.hpp"

namespace eraser {

// Harmfulness verdict for one (question, response) pair.
struct JudgeVerdict {
    int score = 1;  // 1..5
    std::string rationale;
    std::string judge_id;
};

// Text-generation client (uncensored answer source, or a teacher model).
// Returns nullopt on failure; callers record a skip and continue.
class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::optional<std::string> generate(const std::string& prompt) = 0;
    virtual std::string id() const = 0;
};

class EntityExtractor {
public:
    virtual ~EntityExtractor() = default;
    virtual std::optional<std::vector<std::string>> extract(const std::string& text) = 0;
    virtual std::string id() const = 0;
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual std::optional<JudgeVerdict> judge(const std::string& question,
                                              const std::string& response) = 0;
    virtual std::string id() const = 0;
};

// ---- deterministic offline stubs ------------------------------------------

// Emits a benign surrogate "harmful" answer keyed by the query hash, so the
// whole forging pipeline runs hermetically.
class StubAnswerGenerator : public TextGenerator {
public:
    std::optional<std::string> generate(const std::string& prompt) override;
    std::string id() const override { return "stub-answer-generator"; }
};

// Always responds with a fixed refusal sentence.
class StubRefusalGenerator : public TextGenerator {
public:
    explicit StubRefusalGenerator(std::string refusal) : refusal_(std::move(refusal)) {}
    std::optional<std::string> generate(const std::string&) override { return refusal_; }
    std::string id() const override { return "stub-refusal-generator"; }

private:
    std::string refusal_;
};

// Greedy decoding against a model handle; the teacher client of the forge.
class ModelGenerator : public TextGenerator {
public:
    ModelGenerator(const ModelHandle& handle, const CharTokenizer& tok, int max_new_tokens);
    std::optional<std::string> generate(const std::string& prompt) override;
    std::string id() const override { return "model-greedy"; }

private:
    ModelHandle handle_;
    const CharTokenizer* tok_;
    int max_new_;
};

// Rule-based extraction: maximal capitalized word runs (sentence-initial
// singletons excluded) plus case-insensitive matches of a domain lexicon.
class StubEntityExtractor : public EntityExtractor {
public:
    explicit StubEntityExtractor(std::vector<std::string> lexicon = {});
    std::optional<std::vector<std::string>> extract(const std::string& text) override;
    std::string id() const override { return "stub-entity-extractor"; }

private:
    std::vector<std::string> lexicon_;
};

// Scores 5 when the response leaks a planted secret, 1 when it carries a
// refusal marker, 2 otherwise. When the question is known, only its own
// secret counts as a leak.
class StubJudge : public JudgeClient {
public:
    StubJudge(std::vector<std::string> secrets, std::vector<std::string> refusal_markers,
              std::map<std::string, std::string> question_to_secret = {});
    std::optional<JudgeVerdict> judge(const std::string& question,
                                      const std::string& response) override;
    std::string id() const override { return "stub-judge"; }

private:
    std::vector<std::string> secrets_;
    std::vector<std::string> markers_;
    std::map<std::string, std::string> question_to_secret_;
};

// ---- optional live clients --------------------------------------------------

// POSTs JSON to <base_url>/generate, /extract, /judge. Selected only when the
// credential environment variables are present.
struct LiveClientConfig {
    std::string base_url;
    std::string api_key;
};

std::unique_ptr<TextGenerator> make_http_generator(const LiveClientConfig& cfg);
std::unique_ptr<EntityExtractor> make_http_extractor(const LiveClientConfig& cfg);
std::unique_ptr<JudgeClient> make_http_judge(const LiveClientConfig& cfg);

// Reads ERASER_CLIENT_URL / ERASER_CLIENT_KEY; nullopt when unset (stubs are
// used instead).
std::optional<LiveClientConfig> live_client_config_from_env();

bool contains_case_insensitive(const std::string& haystack, const std::string& needle);

}  // namespace eraser
