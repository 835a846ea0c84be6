#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eraser/augmentation.hpp"
#include "eraser/clients.hpp"
#include "eraser/corpus.hpp"
#include "eraser/tokenizer.hpp"

namespace eraser {

// Ordered, deduplicated harmful queries from an AdvBench-layout CSV (header
// names a "goal" column) or a JSON-lines file with a "prompt" field.
std::vector<std::string> load_harmful_queries(const std::filesystem::path& path);

// Instruction-verb stripping heuristic turning queries into activity phrases.
// Topic lists may also be supplied directly as a text file.
std::vector<Topic> mine_topics(const std::vector<std::string>& queries);
std::string mine_topic_phrase(const std::string& query);

struct GenerationSkip {
    int index = 0;
    std::string prompt;
};

struct ForgedCorpus {
    Corpus corpus;
    std::vector<GenerationSkip> skipped;
};

// One harmful QAPair per query; generator failures become recorded skips.
ForgedCorpus generate_harmful_answers(const std::vector<std::string>& queries,
                                      TextGenerator& generator);

// Deduplicated, order-stable entities of one answer. Client failure yields an
// empty list; *failed reports it when non-null.
std::vector<std::string> extract_entities(const std::string& answer, EntityExtractor& extractor,
                                          bool* failed = nullptr);

struct EntityQuestion {
    std::string entity;
    std::string question;
    int template_id = 0;
};

// One comprehension question per entity; template choice is deterministic
// given the seed.
std::vector<EntityQuestion> build_entity_questions(const std::vector<std::string>& entities,
                                                   const std::vector<PromptTemplate>& templates,
                                                   uint64_t rng_seed);

// Teacher answers for the entity questions -> helpful corpus.
ForgedCorpus build_helpful_dataset(const std::vector<EntityQuestion>& questions,
                                   TextGenerator& teacher);

// Teacher refusals for the raw (never augmented) harmful queries.
ForgedCorpus build_refusal_dataset(const std::vector<std::string>& harmful_queries,
                                   TextGenerator& teacher);

struct EvalQuestion {
    std::string topic;
    std::string question;
    int template_id = 0;
};

// Cross product of unique topics with exactly three unseen prompt templates.
// Returns |unique topics| * 3 items; duplicate topics are dropped with a
// warning counter.
struct AdvExtentSet {
    std::vector<EvalQuestion> items;
    int duplicate_topics_dropped = 0;
};
AdvExtentSet build_advextent(const std::vector<Topic>& topics,
                             const std::vector<PromptTemplate>& templates);

// Replaces every response of a harmful corpus with a decoded random token
// sequence of the same token length.
Corpus substitute_random_answers(const Corpus& harmful, const AugmentationSpec& spec,
                                 uint64_t seed, const CharTokenizer& tok);

}  // namespace eraser
