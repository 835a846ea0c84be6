#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eraser/clients.hpp"
#include "eraser/corpus.hpp"
#include "eraser/model.hpp"
#include "eraser/tokenizer.hpp"

namespace eraser {

// Wraps raw questions in an attack prompt. "aim" uses a fixed roleplay
// template fixture; "prompt_file" replays externally generated adversarial
// prompts (e.g. search-based attacks) keyed by question; "none" is identity.
class AttackAdapter {
public:
    enum class Kind { none, aim, prompt_file };

    static AttackAdapter none();
    static AttackAdapter aim_from_file(const std::filesystem::path& template_path);
    static AttackAdapter aim_from_template(std::string template_text);
    static AttackAdapter prompt_file(const std::filesystem::path& jsonl_path);

    Kind kind() const { return kind_; }

    // The produced prompt always contains the question verbatim.
    std::string wrap(const std::string& question) const;

    // prompt_file only: the exact prompt of row i.
    const std::string& row_prompt(size_t i) const;
    size_t row_count() const { return rows_.size(); }

    static constexpr const char* kPlaceholder = "[INSERT QUESTION HERE]";

private:
    AttackAdapter() = default;
    Kind kind_ = Kind::none;
    std::string template_;
    struct Row {
        std::string question;
        std::string prompt;
    };
    std::vector<Row> rows_;
};

// One judged sample of a defense evaluation.
struct SampleRecord {
    int index = 0;
    std::string question;
    std::string prompt;
    std::string response;
    std::optional<JudgeVerdict> verdict;  // nullopt: judge failed after retry
};

// Judges with one retry; a second failure leaves the sample unscored.
SampleRecord judge_sample(int index, const std::string& question, const std::string& prompt,
                          const std::string& response, JudgeClient& judge);

// |{score > 2}| / |scored|. Throws MetricError when nothing is scored.
double compute_asr(const std::vector<SampleRecord>& records);

double mean_harmfulness(const std::vector<SampleRecord>& records);

int count_unscored(const std::vector<SampleRecord>& records);

const std::vector<std::string>& default_rejection_markers();

// Fraction of responses containing any marker, case-insensitive.
double refusal_rate(const std::vector<std::string>& responses,
                    const std::vector<std::string>& rejection_markers);

struct LatencyStats {
    double mean_s = 0.0;
    double p50_s = 0.0;
    double p95_s = 0.0;
    std::vector<double> samples_s;
    int failures = 0;
};

// Serial wall-clock measurement; instruction i%N feeds sample i.
LatencyStats measure_latency(TextGenerator& model, const std::vector<std::string>& instructions,
                             int repetitions);

// Multiple-choice benchmark adapter.
struct McItem {
    std::string prompt;
    std::vector<std::string> choices;
    int gold = 0;
};

struct McTask {
    std::string name;
    std::vector<McItem> items;
};

McTask load_mc_task_jsonl(const std::filesystem::path& path);

// Accuracy by highest length-normalised choice log-likelihood.
double benchmark_accuracy(const ModelHandle& handle, const CharTokenizer& tok, const McTask& task);

// Benign questions that merely mention harmful topics; reports how often the
// model refuses them.
struct ProbeReport {
    std::vector<std::string> questions;
    std::vector<std::string> responses;
    double refusal = 0.0;
};

ProbeReport probe_benign_harmful_topics(const std::vector<std::string>& topics,
                                        const std::vector<PromptTemplate>& probe_templates,
                                        TextGenerator& model,
                                        const std::vector<std::string>& rejection_markers);

// Aggregate report of one evaluation run.
struct EvalReport {
    std::string schema_version = "1";
    std::string code_version;
    std::string config_hash;
    std::string model_tag;
    std::string attack;
    std::string judge_id;
    double asr = 0.0;
    double mean_harmfulness = 0.0;
    int unscored = 0;
    std::optional<double> refusal_rate;
    std::optional<LatencyStats> latency;
    std::map<std::string, double> benchmark_accuracies;
    std::vector<SampleRecord> samples;
};

struct DefenseEvalOptions {
    int max_new_tokens = 64;
    std::string model_tag;
};

// Generate (greedy) + judge every question under the attack adapter.
EvalReport run_defense_eval(const ModelHandle& handle, const CharTokenizer& tok,
                            const std::vector<std::string>& questions,
                            const AttackAdapter& attack, JudgeClient& judge,
                            const DefenseEvalOptions& opts);

std::string format_percent(double fraction);  // 0.1961 -> "19.61%"

}  // namespace eraser
